"""Axis-aligned box grid with cell-centered scalars and face-centered vectors."""

import numpy as np

from .errors import DomainError

MIN_CELLS_PER_AXIS = 4


class Grid:
    """Uniform structured grid on a box [0, L1] x ... x [0, Ld], d in {2, 3}.

    Scalars live at cell centers with one ghost layer per side; vector
    components live on the faces normal to their axis (staggered layout).
    """

    def __init__(self, dims, extents):
        dims = tuple(int(d) for d in dims)
        extents = tuple(float(e) for e in extents)
        if len(dims) not in (2, 3):
            raise DomainError(f"grid must have 2 or 3 axes, got {len(dims)}")
        if len(extents) != len(dims):
            raise DomainError("dims and extents must have equal length")
        if any(d < MIN_CELLS_PER_AXIS for d in dims):
            raise DomainError(f"each axis needs >= {MIN_CELLS_PER_AXIS} cells, got {dims}")
        if any(not np.isfinite(e) or e <= 0.0 for e in extents):
            raise DomainError(f"extents must be positive and finite, got {extents}")
        self.dims = dims
        self.extents = extents
        self.ndim = len(dims)
        self.spacing = tuple(e / d for e, d in zip(extents, dims))
        self.cell_volume = float(np.prod(self.spacing))

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dims == other.dims
            and self.extents == other.extents
        )

    def __hash__(self):
        return hash((self.dims, self.extents))

    def __repr__(self):
        return f"Grid(dims={self.dims}, extents={self.extents})"

    def cell_coords(self, axis, padded=False):
        """1D cell-center coordinates along one axis (optionally with ghosts)."""
        h = self.spacing[axis]
        idx = np.arange(-1, self.dims[axis] + 1) if padded else np.arange(self.dims[axis])
        return (idx + 0.5) * h

    def face_coords(self, axis):
        """1D face-position coordinates along one axis (walls included)."""
        return np.arange(self.dims[axis] + 1) * self.spacing[axis]

    def cell_mesh(self, padded=False):
        """Meshgrid of cell-center coordinates, 'ij' indexing."""
        axes = [self.cell_coords(k, padded=padded) for k in range(self.ndim)]
        return np.meshgrid(*axes, indexing="ij")

    def face_mesh(self, comp):
        """Meshgrid of face-center coordinates for one vector component.

        Component `comp` is sampled at face positions along its own axis and
        at cell centers along the others.
        """
        axes = [
            self.face_coords(k) if k == comp else self.cell_coords(k)
            for k in range(self.ndim)
        ]
        return np.meshgrid(*axes, indexing="ij")

    def face_shape(self, comp):
        return tuple(
            d + 1 if k == comp else d for k, d in enumerate(self.dims)
        )
