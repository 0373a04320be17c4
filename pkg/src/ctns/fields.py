"""Cell-centered scalar fields, face-centered (staggered) vector fields,
and the discrete calculus on them.

Scalars carry one ghost layer per side.  Wall conditions are the zero-flux
mirror (ghost equals first interior cell) or externally managed ghosts.
Vector components live on the faces normal to their own axis; the wall
condition for velocities is no-slip: normal boundary faces are pinned to
zero and tangential ghosts are odd reflections across the wall.
"""

import numpy as np

from .errors import DomainError
from .grid import Grid

BC_NEUMANN = "neumann"
BC_FIXED = "fixed"

BC_NOSLIP = "noslip"
BC_RAW = "raw"


def _tup(ndim, axis, s, rest=None):
    """Index tuple with slice `s` at `axis` and `rest` elsewhere."""
    out = [slice(None) if rest is None else rest for _ in range(ndim)]
    out[axis] = s
    return tuple(out)


def _core(ndim):
    return (slice(1, -1),) * ndim


def _comp_tup(ndim, comp, s_axis, s_tang=slice(1, -1)):
    """Index tuple for a staggered component: `s_axis` along its own axis."""
    return tuple(s_axis if j == comp else s_tang for j in range(ndim))


class ScalarField:
    """Cell-centered scalar with one ghost layer per side."""

    def __init__(self, grid, values, bc=BC_NEUMANN):
        if bc not in (BC_NEUMANN, BC_FIXED):
            raise DomainError(f"unknown scalar bc {bc!r}")
        expected = tuple(d + 2 for d in grid.dims)
        if values.shape != expected:
            raise DomainError(f"padded shape {values.shape} != {expected}")
        self.grid = grid
        self.values = values
        self.bc = bc

    # -- construction -------------------------------------------------

    @classmethod
    def zeros(cls, grid, bc=BC_NEUMANN):
        return cls(grid, np.zeros(tuple(d + 2 for d in grid.dims)), bc)

    @classmethod
    def full(cls, grid, value, bc=BC_NEUMANN):
        return cls(grid, np.full(tuple(d + 2 for d in grid.dims), float(value)), bc)

    @classmethod
    def from_interior(cls, grid, interior, bc=BC_NEUMANN):
        f = cls.zeros(grid, bc)
        f.interior[...] = interior
        f.apply_bc()
        return f

    @classmethod
    def from_function(cls, grid, fn, bc=BC_NEUMANN):
        """Sample fn(*coords) at cell centers, ghosts included.

        Fixed-ghost fields keep the analytic ghost samples; mirror fields
        overwrite them via apply_bc.
        """
        f = cls(grid, np.asarray(fn(*grid.cell_mesh(padded=True)), dtype=float), bc)
        f.apply_bc()
        return f

    # -- access -------------------------------------------------------

    @property
    def interior(self):
        return self.values[_core(self.grid.ndim)]

    def copy(self):
        return ScalarField(self.grid, self.values.copy(), self.bc)

    def apply_bc(self):
        """Fill ghosts.  Mirror across each wall for zero-flux fields;
        leave externally managed ghosts untouched.  Idempotent."""
        if self.bc == BC_NEUMANN:
            v = self.values
            nd = self.grid.ndim
            for k in range(nd):
                v[_tup(nd, k, 0)] = v[_tup(nd, k, 1)]
                v[_tup(nd, k, -1)] = v[_tup(nd, k, -2)]
        return self


class VectorField:
    """Face-centered vector field: component k on faces normal to axis k.

    Each component array is padded by one ghost entry on every axis, so
    component k has shape dims + 2 except along axis k where it is dims + 3
    (dims+1 physical faces, walls included, plus two ghosts).
    """

    def __init__(self, grid, comps, bc=BC_NOSLIP):
        if bc not in (BC_NOSLIP, BC_RAW):
            raise DomainError(f"unknown vector bc {bc!r}")
        if len(comps) != grid.ndim:
            raise DomainError("component count must match grid dimension")
        for k, c in enumerate(comps):
            expected = tuple(
                d + 3 if j == k else d + 2 for j, d in enumerate(grid.dims)
            )
            if c.shape != expected:
                raise DomainError(f"component {k} shape {c.shape} != {expected}")
        self.grid = grid
        self.comps = list(comps)
        self.bc = bc

    @classmethod
    def zeros(cls, grid, bc=BC_NOSLIP):
        comps = [
            np.zeros(tuple(d + 3 if j == k else d + 2 for j, d in enumerate(grid.dims)))
            for k in range(grid.ndim)
        ]
        return cls(grid, comps, bc)

    @classmethod
    def from_face_arrays(cls, grid, faces, bc=BC_NOSLIP):
        """Build from unpadded physical-face arrays (walls included)."""
        v = cls.zeros(grid, bc)
        for k, arr in enumerate(faces):
            if arr.shape != grid.face_shape(k):
                raise DomainError(
                    f"component {k} face shape {arr.shape} != {grid.face_shape(k)}"
                )
            v.face_values(k)[...] = arr
        v.apply_bc()
        return v

    @classmethod
    def from_function(cls, grid, fns, bc=BC_NOSLIP):
        """Sample analytic component functions at face centers."""
        faces = [np.asarray(fn(*grid.face_mesh(k)), dtype=float) for k, fn in enumerate(fns)]
        return cls.from_face_arrays(grid, faces, bc)

    def face_values(self, k):
        """Writable view of component k on its physical faces."""
        return self.comps[k][_comp_tup(self.grid.ndim, k, slice(1, -1))]

    def copy(self):
        return VectorField(self.grid, [c.copy() for c in self.comps], self.bc)

    def apply_bc(self):
        """No-slip: pin wall-normal boundary faces to zero, odd-reflect
        ghosts.  Raw fields just zero their ghosts.  Idempotent."""
        nd = self.grid.ndim
        for k, c in enumerate(self.comps):
            if self.bc == BC_NOSLIP:
                c[_comp_tup(nd, k, 1)] = 0.0
                c[_comp_tup(nd, k, -2)] = 0.0
                # ghosts beyond the wall face: odd reflection about the face
                c[_comp_tup(nd, k, 0)] = -c[_comp_tup(nd, k, 2)]
                c[_comp_tup(nd, k, -1)] = -c[_comp_tup(nd, k, -3)]
                for j in range(nd):
                    if j == k:
                        continue
                    # tangential wall: face centers sit half a cell inside,
                    # odd mirror makes the wall average vanish
                    c[_tup(nd, j, 0)] = -c[_tup(nd, j, 1)]
                    c[_tup(nd, j, -1)] = -c[_tup(nd, j, -2)]
            else:
                for j in range(nd):
                    c[_tup(nd, j, 0)] = 0.0
                    c[_tup(nd, j, -1)] = 0.0
        return self

    def max_speed(self):
        """Largest face-speed-over-spacing ratio times spacing, per axis max
        of |component| (used for CFL checks)."""
        return max(
            float(np.max(np.abs(self.face_values(k)))) for k in range(self.grid.ndim)
        )


# ---------------------------------------------------------------------------
# reductions


def integrate(f):
    """Midpoint-rule integral of a scalar field over the box."""
    return float(f.interior.sum()) * f.grid.cell_volume


def lp_norm(f, p):
    """Discrete Lebesgue p-norm, p >= 1 or inf, midpoint quadrature."""
    if p != np.inf and p < 1:
        raise DomainError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(f.interior)
    if p == np.inf:
        return float(a.max())
    return float((a**p).sum() * f.grid.cell_volume) ** (1.0 / p)


# ---------------------------------------------------------------------------
# first-order operators


def face_mean(f, k):
    """Arithmetic two-cell average of a scalar onto the k-faces
    (unpadded physical-face array, walls included)."""
    nd = f.grid.ndim
    P = f.values
    lo = P[_tup(nd, k, slice(0, -1), rest=slice(1, -1))]
    hi = P[_tup(nd, k, slice(1, None), rest=slice(1, -1))]
    return 0.5 * (lo + hi)


def face_diff(f, k):
    """Across-face difference quotient (f_R - f_L)/h_k on the k-faces
    (unpadded physical-face array, walls included)."""
    nd = f.grid.ndim
    P = f.values
    lo = P[_tup(nd, k, slice(0, -1), rest=slice(1, -1))]
    hi = P[_tup(nd, k, slice(1, None), rest=slice(1, -1))]
    return (hi - lo) / f.grid.spacing[k]


def grad(f):
    """Face-centered gradient of a scalar field.

    On zero-flux fields the wall faces come out exactly zero through the
    mirror ghosts; fixed-ghost fields yield their one-sided wall values.
    """
    f.apply_bc()
    out = VectorField.zeros(f.grid, bc=BC_RAW)
    for k in range(f.grid.ndim):
        out.face_values(k)[...] = face_diff(f, k)
    return out


def div(v):
    """Cell-centered divergence of a face vector field."""
    g = v.grid
    out = np.zeros(g.dims)
    for k in range(g.ndim):
        fv = v.face_values(k)
        hi = fv[_tup(g.ndim, k, slice(1, None))]
        lo = fv[_tup(g.ndim, k, slice(0, -1))]
        out += (hi - lo) / g.spacing[k]
    return ScalarField.from_interior(g, out)


def flux_divergence(grid, fluxes):
    """Divergence (interior array) of per-axis physical-face flux arrays."""
    out = np.zeros(grid.dims)
    for k, fl in enumerate(fluxes):
        hi = fl[_tup(grid.ndim, k, slice(1, None))]
        lo = fl[_tup(grid.ndim, k, slice(0, -1))]
        out += (hi - lo) / grid.spacing[k]
    return out


def laplace(f):
    """Cell-centered Laplacian with the field's ghost convention."""
    f.apply_bc()
    nd = f.grid.ndim
    P = f.values
    out = np.zeros(f.grid.dims)
    for k in range(nd):
        h2 = f.grid.spacing[k] ** 2
        hi = P[_tup(nd, k, slice(2, None), rest=slice(1, -1))]
        mid = P[_tup(nd, k, slice(1, -1), rest=slice(1, -1))]
        lo = P[_tup(nd, k, slice(0, -2), rest=slice(1, -1))]
        out += (hi - 2.0 * mid + lo) / h2
    return ScalarField.from_interior(f.grid, out)


def grad_sq_integral(f):
    """Integral of the squared face gradient of a scalar field."""
    f.apply_bc()
    total = 0.0
    for k in range(f.grid.ndim):
        total += float((face_diff(f, k) ** 2).sum())
    return total * f.grid.cell_volume


def upwind_divergence(f, u):
    """Divergence (interior array) of the upwind transport flux f_up * u.

    Face values of f are taken from the donor cell selected by the sign of
    the face velocity; wall faces carry zero velocity, hence zero flux, so
    the column sums telescope and total content is conserved exactly.
    """
    f.apply_bc()
    g = f.grid
    nd = g.ndim
    P = f.values
    out = np.zeros(g.dims)
    for k in range(nd):
        uk = u.face_values(k)
        cL = P[_tup(nd, k, slice(0, -1), rest=slice(1, -1))]
        cR = P[_tup(nd, k, slice(1, None), rest=slice(1, -1))]
        flux = np.maximum(uk, 0.0) * cL + np.minimum(uk, 0.0) * cR
        hi = flux[_tup(nd, k, slice(1, None))]
        lo = flux[_tup(nd, k, slice(0, -1))]
        out += (hi - lo) / g.spacing[k]
    return out


# ---------------------------------------------------------------------------
# vector reductions


def vf_dot(a, b):
    """Face-weighted inner product of two vector fields."""
    if a.grid != b.grid:
        raise DomainError("vector fields live on different grids")
    total = 0.0
    for k in range(a.grid.ndim):
        total += float((a.face_values(k) * b.face_values(k)).sum())
    return total * a.grid.cell_volume


def vf_norm_sq(a):
    """Squared discrete L2 norm of a face vector field."""
    return vf_dot(a, a)


def mac_grad_pairing(a, b):
    """Discrete pairing sum_{k,j} integral of (d_j a_k)(d_j b_k).

    Along a component's own axis the derivative sits at cell centers.
    Across axes it sits at edge positions between faces; wall edges use the
    half-cell one-sided derivative 2*value/h with half quadrature weight,
    which makes the pairing exactly the Dirichlet form of the no-slip
    component Laplacian.
    """
    if a.grid != b.grid:
        raise DomainError("vector fields live on different grids")
    g = a.grid
    nd = g.ndim
    total = 0.0
    for k in range(nd):
        fa = a.face_values(k)
        fb = b.face_values(k)
        h_k = g.spacing[k]
        da = np.diff(fa, axis=k) / h_k
        db = np.diff(fb, axis=k) / h_k
        total += float((da * db).sum())
        for j in range(nd):
            if j == k:
                continue
            h_j = g.spacing[j]
            da = np.diff(fa, axis=j) / h_j
            db = np.diff(fb, axis=j) / h_j
            total += float((da * db).sum())
            lo_a = fa[_tup(nd, j, 0)]
            lo_b = fb[_tup(nd, j, 0)]
            hi_a = fa[_tup(nd, j, -1)]
            hi_b = fb[_tup(nd, j, -1)]
            total += 0.5 * float(
                ((2.0 * lo_a / h_j) * (2.0 * lo_b / h_j)).sum()
                + ((2.0 * hi_a / h_j) * (2.0 * hi_b / h_j)).sum()
            )
    return total * g.cell_volume


def face_to_center(v):
    """Average each component onto cell centers; list of interior arrays."""
    g = v.grid
    out = []
    for k in range(g.ndim):
        fv = v.face_values(k)
        hi = fv[_tup(g.ndim, k, slice(1, None))]
        lo = fv[_tup(g.ndim, k, slice(0, -1))]
        out.append(0.5 * (hi + lo))
    return out


def linear_potential(grid, gravity, axis=0):
    """Gravitational-type potential gravity * x_axis as a fixed-ghost field.

    The ghosts carry the analytic extension, so face differences equal the
    constant slope on every face, walls included.
    """
    f = ScalarField.from_function(
        grid, lambda *xs: gravity * xs[axis], bc=BC_FIXED
    )
    return f
