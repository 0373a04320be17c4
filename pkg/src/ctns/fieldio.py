"""Snapshot persistence: legacy VTK structured-points text and a raw
little-endian binary dump.

Binary layout (64-byte header, then float64 payload):

    bytes 0..7    magic b"CTNSFLD1"
    bytes 8..11   uint32 kind: 0 scalar, 1 vector
    bytes 12..15  uint32 ndim (2 or 3)
    bytes 16..27  uint32 dims[3], unused axes zero
    bytes 28..51  float64 extents[3], unused axes zero
    bytes 52..59  float64 sample time
    bytes 60..63  zero padding

Scalar payload: interior cell values, C order.  Vector payload: the
physical-face array of each component in turn (walls included), C order.
All numbers little-endian.
"""

import struct

import numpy as np

from .errors import DomainError
from .fields import ScalarField, VectorField, face_to_center
from .grid import Grid

MAGIC = b"CTNSFLD1"
_HEADER = struct.Struct("<8sII3I3dd4x")
KIND_SCALAR = 0
KIND_VECTOR = 1


def _header_bytes(grid, kind, time):
    dims = list(grid.dims) + [0] * (3 - grid.ndim)
    exts = list(grid.extents) + [0.0] * (3 - grid.ndim)
    return _HEADER.pack(MAGIC, kind, grid.ndim, *dims, *exts, float(time))


def write_binary(path, field, time=0.0):
    """Dump a scalar or vector field with its grid metadata."""
    if isinstance(field, ScalarField):
        kind = KIND_SCALAR
        payload = [np.ascontiguousarray(field.interior, dtype="<f8")]
    elif isinstance(field, VectorField):
        kind = KIND_VECTOR
        payload = [
            np.ascontiguousarray(field.face_values(k), dtype="<f8")
            for k in range(field.grid.ndim)
        ]
    else:
        raise DomainError(f"cannot dump object of type {type(field).__name__}")
    with open(path, "wb") as fh:
        fh.write(_header_bytes(field.grid, kind, time))
        for block in payload:
            fh.write(block.tobytes())


def read_binary(path):
    """Load a dumped field; returns (field, time)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise DomainError(f"{path}: truncated header")
        magic, kind, ndim, d0, d1, d2, e0, e1, e2, time = _HEADER.unpack(head)
        if magic != MAGIC:
            raise DomainError(f"{path}: bad magic {magic!r}")
        dims = (d0, d1, d2)[:ndim]
        extents = (e0, e1, e2)[:ndim]
        grid = Grid(dims, extents)
        raw = fh.read()
    if kind == KIND_SCALAR:
        n = int(np.prod(dims))
        if len(raw) != 8 * n:
            raise DomainError(f"{path}: payload size mismatch")
        data = np.frombuffer(raw, dtype="<f8").reshape(dims)
        return ScalarField.from_interior(grid, data.astype(float)), time
    if kind == KIND_VECTOR:
        faces = []
        off = 0
        for k in range(ndim):
            shape = grid.face_shape(k)
            n = int(np.prod(shape))
            block = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
            faces.append(block.reshape(shape).astype(float))
            off += 8 * n
        if off != len(raw):
            raise DomainError(f"{path}: payload size mismatch")
        return VectorField.from_face_arrays(grid, faces), time
    raise DomainError(f"{path}: unknown field kind {kind}")


def _vtk_header(grid, title):
    # legacy structured points: points are cell corners, data lives on cells
    dims = list(grid.dims) + [1] * (3 - grid.ndim)
    spac = list(grid.spacing) + [1.0] * (3 - grid.ndim)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {dims[0] + 1} {dims[1] + 1} {dims[2] + 1}",
        "ORIGIN 0.0 0.0 0.0",
        f"SPACING {spac[0]:.17g} {spac[1]:.17g} {spac[2]:.17g}",
        f"CELL_DATA {int(np.prod(grid.dims))}",
    ]
    return "\n".join(lines)


def _vtk_order(arr, ndim):
    # VTK runs x fastest; our arrays are C-ordered with x slowest
    return arr.transpose(tuple(reversed(range(ndim)))).ravel()


def write_vtk_scalar(path, field, name="field", title="ctns snapshot"):
    vals = _vtk_order(field.interior, field.grid.ndim)
    with open(path, "w") as fh:
        fh.write(_vtk_header(field.grid, title) + "\n")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(f"{v:.17g}" for v in vals))
        fh.write("\n")


def write_vtk_vector(path, field, name="velocity", title="ctns snapshot"):
    g = field.grid
    centered = face_to_center(field)
    while len(centered) < 3:
        centered.append(np.zeros(g.dims))
    cols = [_vtk_order(c, g.ndim) for c in centered]
    with open(path, "w") as fh:
        fh.write(_vtk_header(g, title) + "\n")
        fh.write(f"VECTORS {name} double\n")
        fh.write(
            "\n".join(
                f"{a:.17g} {b:.17g} {c:.17g}" for a, b, c in zip(*cols)
            )
        )
        fh.write("\n")
