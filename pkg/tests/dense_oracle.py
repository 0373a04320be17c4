"""Loop-built dense reference for one velocity step.

Everything here is written with plain Python loops and dense linear
algebra, independently of the vectorized production kernels: component
Laplacian with odd-mirror tangential walls, two-stage face interpolation
for the advecting velocity, centered derivatives, arithmetic-mean
buoyancy, and an exact (least-squares) pressure projection on the
zero-mean subspace.  Used to pin the production step to 1e-10.
"""

import itertools

import numpy as np


def _tangential(fv, pos, k):
    """fv[pos] with odd mirroring on out-of-range tangential indices.

    Tangential face rows sit half a cell inside the wall; the discrete
    no-slip contract extends them with flipped sign so the wall average
    vanishes.  Own-axis indices (axis k) are never out of range.
    """
    pos = list(pos)
    sign = 1.0
    for ax in range(fv.ndim):
        if ax == k:
            continue
        if pos[ax] == -1:
            pos[ax] = 0
            sign = -sign
        elif pos[ax] == fv.shape[ax]:
            pos[ax] = fv.shape[ax] - 1
            sign = -sign
    return sign * fv[tuple(pos)]


def _shift(pos, ax, d):
    q = list(pos)
    q[ax] += d
    return tuple(q)


def _interior_faces(dims, k):
    # all tangential rows are physical; only the two wall faces along the
    # component's own axis are excluded (they stay pinned at zero)
    ranges = [range(dims[ax]) for ax in range(len(dims))]
    ranges[k] = range(1, dims[k])
    return itertools.product(*ranges)


def _cell_of_face(pos, k, side):
    """Cell index tuple on one side (0: low, 1: high) of a k-face."""
    q = list(pos)
    q[k] = pos[k] - 1 + side
    return tuple(q)


def _comp_at_cell(fv_j, cell, j):
    """Component j averaged to a cell center: mean of its two j-faces."""
    lo = list(cell)
    hi = list(cell)
    hi[j] += 1
    return 0.5 * (fv_j[tuple(lo)] + fv_j[tuple(hi)])


def dense_fluid_step(u, n, phi, dt):
    """One unfiltered velocity step; returns (face arrays, pressure).

    Matches the production pipeline at epsilon = 0: explicit predictor
    with viscosity, centered self-advection, and density buoyancy, then
    exact projection.
    """
    g = u.grid
    nd = g.ndim
    dims = g.dims
    h = g.spacing
    faces = [np.array(u.face_values(k)) for k in range(nd)]
    n_arr = n.interior
    phi_pad = phi.values

    star = [f.copy() for f in faces]
    for k in range(nd):
        fv = faces[k]
        for pos in _interior_faces(dims, k):
            lap = 0.0
            for j in range(nd):
                hi = _tangential(fv, _shift(pos, j, +1), k)
                lo = _tangential(fv, _shift(pos, j, -1), k)
                lap += (hi - 2.0 * fv[pos] + lo) / h[j] ** 2

            adv = 0.0
            for j in range(nd):
                if j == k:
                    vj = fv[pos]
                else:
                    a = _cell_of_face(pos, k, 0)
                    b = _cell_of_face(pos, k, 1)
                    vj = 0.5 * (
                        _comp_at_cell(faces[j], a, j)
                        + _comp_at_cell(faces[j], b, j)
                    )
                dhi = _tangential(fv, _shift(pos, j, +1), k)
                dlo = _tangential(fv, _shift(pos, j, -1), k)
                adv += vj * (dhi - dlo) / (2.0 * h[j])

            a = _cell_of_face(pos, k, 0)
            b = _cell_of_face(pos, k, 1)
            n_face = 0.5 * (n_arr[a] + n_arr[b])
            pa = tuple(i + 1 for i in a)
            pb = tuple(i + 1 for i in b)
            dphi = (phi_pad[pb] - phi_pad[pa]) / h[k]

            star[k][pos] = fv[pos] + dt * (lap - adv + n_face * dphi)
        # walls stay pinned
        for pos in itertools.product(*[range(s) for s in star[k].shape]):
            if pos[k] == 0 or pos[k] == dims[k]:
                star[k][pos] = 0.0

    # projection: solve -L p = -div(star)/dt on the zero-mean subspace
    cells = list(itertools.product(*[range(d) for d in dims]))
    index = {cell: r for r, cell in enumerate(cells)}
    size = len(cells)
    A = np.zeros((size, size))
    rhs = np.zeros(size)
    for cell, r in index.items():
        d = 0.0
        for k in range(nd):
            d += (star[k][_shift(cell, k, +1)] - star[k][cell]) / h[k]
        rhs[r] = -d / dt
        for k in range(nd):
            for dd in (-1, +1):
                nb = _shift(cell, k, dd)
                if 0 <= nb[k] < dims[k]:
                    A[r, index[nb]] -= 1.0 / h[k] ** 2
                    A[r, r] += 1.0 / h[k] ** 2
    rhs -= rhs.mean()
    p_flat, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    p_flat -= p_flat.mean()
    p = p_flat.reshape(dims)

    out = [s.copy() for s in star]
    for k in range(nd):
        for pos in _interior_faces(dims, k):
            a = _cell_of_face(pos, k, 0)
            b = _cell_of_face(pos, k, 1)
            out[k][pos] = star[k][pos] - dt * (p[b] - p[a]) / h[k]
    return out, p
