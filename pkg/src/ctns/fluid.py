"""Projection step for the carrying velocity.

One step runs: regularize the advecting velocity through a screened
inverse Laplacian plus re-projection, explicit predictor with centered
advection and the density buoyancy force, then a pressure projection back
onto the discretely divergence-free space:

    v      = filter(u)                      (componentwise (I - eps*L)^-1, reprojected)
    u*     = u + dt*(L u - (v.grad)u + n grad(phi))
    L p    = div(u*)/dt,   u_new = u* - dt grad(p)

Walls are no-slip throughout.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CflViolation, DomainError
from .fields import (
    ScalarField,
    VectorField,
    _comp_tup,
    _tup,
    div,
    face_diff,
    face_mean,
    laplace,
    mac_grad_pairing,
    vf_norm_sq,
)
from .linsolve import pcg
from .signal import _apply_helmholtz, _helmholtz_diag


@dataclass
class FluidStepParams:
    """Parameters of one velocity step.

    epsilon   screening weight of the advection regularizer (0 disables it)
    dt        step size
    phi       gravitational-type potential (cell field, ghosts supplied)
    proj_tol  max-norm divergence budget after projection, in (0, 1e-6]
    cfl       face-speed Courant bound for the explicit advection
    """

    epsilon: float
    dt: float
    phi: ScalarField
    proj_tol: float = 1e-8
    cfl: float = 0.5

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise DomainError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not self.dt > 0.0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not (0.0 < self.proj_tol <= 1e-6):
            raise DomainError(f"proj_tol must lie in (0, 1e-6], got {self.proj_tol}")
        if not np.all(np.isfinite(self.phi.values)):
            raise DomainError("potential has non-finite entries")
        # potential must have bounded discrete first and second differences
        for k in range(self.phi.grid.ndim):
            if not np.all(np.isfinite(face_diff(self.phi, k))):
                raise DomainError("potential gradient has non-finite entries")
        if not np.all(np.isfinite(laplace(self.phi).interior)):
            raise DomainError("potential curvature has non-finite entries")


def _ix(nd, shifts=None):
    """Index tuple defaulting to slice(1, -1) per axis, overridable."""
    out = [slice(1, -1)] * nd
    if shifts:
        for ax, s in shifts.items():
            out[ax] = s
    return tuple(out)


# ---------------------------------------------------------------------------
# component Laplacian with no-slip walls


def laplace_component(u, k):
    """Second differences of component k at its physical faces.

    Requires ghosts up to date (odd wall reflections).  Wall-face rows are
    meaningless and are re-pinned by the caller.
    """
    g = u.grid
    nd = g.ndim
    c = u.comps[k]
    out = np.zeros(g.face_shape(k))
    for j in range(nd):
        h2 = g.spacing[j] ** 2
        hi = c[_ix(nd, {j: slice(2, None)})]
        mid = c[_ix(nd)]
        lo = c[_ix(nd, {j: slice(0, -2)})]
        out += (hi - 2.0 * mid + lo) / h2
    return out


def dirichlet_energy(u):
    """Integral of the squared discrete velocity gradient (no-slip form)."""
    return mac_grad_pairing(u, u)


# ---------------------------------------------------------------------------
# projection


def _poisson_solve(grid, rhs, *, inf_tol, abs2_tol=None, x0=None, maxiter=None):
    """Solve -L p = rhs (zero-flux walls) on the zero-mean subspace."""
    rhs = rhs - rhs.mean()
    if maxiter is None:
        maxiter = 60 * max(grid.dims) + 100
    x0_arr = None
    if x0 is not None:
        x0_arr = x0.interior if hasattr(x0, "interior") else x0
        x0_arr = x0_arr - x0_arr.mean()
    diag = _helmholtz_diag(grid, 1.0, 0.0)
    # guard the all-wall corner diagonal against zeros on tiny grids
    diag = np.maximum(diag, 1e-300)
    sol = pcg(
        lambda x: _apply_helmholtz(grid, x, 1.0, 0.0),
        rhs,
        x0=x0_arr,
        diag=diag,
        rtol=0.0,
        inf_tol=inf_tol,
        abs2_tol=abs2_tol,
        maxiter=maxiter,
        name="pressure solve",
    )
    return sol - sol.mean()


def project(u, *, dt=1.0, proj_tol=1e-8, abs2_tol=None, p_init=None):
    """Remove the discrete gradient part: returns (u_proj, p) with
    div(u_proj) = div(u) - dt*L p held under proj_tol/10 in max norm."""
    g = u.grid
    u.apply_bc()
    rhs = -div(u).interior / dt
    p_arr = _poisson_solve(
        g,
        rhs,
        inf_tol=proj_tol / (10.0 * dt),
        abs2_tol=abs2_tol,
        x0=p_init,
    )
    p = ScalarField.from_interior(g, p_arr)
    out = u.copy()
    for k in range(g.ndim):
        out.face_values(k)[...] -= dt * face_diff(p, k)
    out.apply_bc()
    return out, p


# ---------------------------------------------------------------------------
# screened regularizer


def _filter_diag(grid, k, epsilon):
    shape = tuple(
        d - 1 if j == k else d for j, d in enumerate(grid.dims)
    )
    diag = np.ones(shape)
    nd = grid.ndim
    for j in range(nd):
        h2 = grid.spacing[j] ** 2
        diag += 2.0 * epsilon / h2
        if j != k:
            diag[_tup(nd, j, 0)] += epsilon / h2
            diag[_tup(nd, j, -1)] += epsilon / h2
    return diag


def _filter_apply(grid, k, x, epsilon):
    nd = grid.ndim
    shape = tuple(
        d + 3 if j == k else d + 2 for j, d in enumerate(grid.dims)
    )
    c = np.zeros(shape)
    c[_ix(nd, {k: slice(2, -2)})] = x
    for j in range(nd):
        if j == k:
            continue
        c[_tup(nd, j, 0)] = -c[_tup(nd, j, 1)]
        c[_tup(nd, j, -1)] = -c[_tup(nd, j, -2)]
    out = x.copy()
    base = {k: slice(2, -2)}
    for j in range(nd):
        h2 = grid.spacing[j] ** 2
        hi_s = dict(base)
        lo_s = dict(base)
        if j == k:
            hi_s[k] = slice(3, -1)
            lo_s[k] = slice(1, -3)
        else:
            hi_s[j] = slice(2, None)
            lo_s[j] = slice(0, -2)
        hi = c[_ix(nd, hi_s)]
        mid = c[_ix(nd, base)]
        lo = c[_ix(nd, lo_s)]
        out -= epsilon * (hi - 2.0 * mid + lo) / h2
    return out


def helmholtz_filter(u, epsilon, *, proj_tol=1e-8, rtol=1e-11, maxiter=None):
    """Screened smoothing of a velocity field.

    Solves (I - epsilon*L) v = u componentwise with no-slip walls, then
    re-projects v onto the discretely divergence-free space.  epsilon = 0
    returns an identical copy without touching a solver.  The map never
    expands the L2 norm beyond roundoff and solver tolerance.
    """
    if epsilon < 0.0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon}")
    if epsilon == 0.0:
        return u.copy()
    g = u.grid
    u.apply_bc()
    if maxiter is None:
        maxiter = 40 * max(g.dims) + 200
    v = VectorField.zeros(g)
    for k in range(g.ndim):
        rhs = u.comps[k][_ix(g.ndim, {k: slice(2, -2)})]
        sol = pcg(
            lambda x, _k=k: _filter_apply(g, _k, x, epsilon),
            rhs,
            diag=_filter_diag(g, k, epsilon),
            rtol=rtol,
            maxiter=maxiter,
            name="velocity regularizer",
        )
        v.comps[k][_ix(g.ndim, {k: slice(2, -2)})] = sol
    v.apply_bc()
    scale = np.sqrt(vf_norm_sq(v))
    abs2 = 1e-11 * scale / max(g.extents) if scale > 0.0 else None
    out, _ = project(v, dt=1.0, proj_tol=proj_tol, abs2_tol=abs2)
    return out


# ---------------------------------------------------------------------------
# advection, forcing, step


def _interp_comp(v, j, k):
    """Component j of v averaged onto the k-faces (face-shaped array).

    Two-stage two-point means: faces -> cells along j, then cells -> faces
    along k.  Tangential ghost cells enter for the wall-adjacent k-faces,
    so the odd mirror makes the interpolated wall value consistent with
    no-slip.
    """
    g = v.grid
    nd = g.ndim
    a = v.comps[j]
    b = 0.5 * (
        a[_ix(nd, {j: slice(1, -2), k: slice(None)})]
        + a[_ix(nd, {j: slice(2, -1), k: slice(None)})]
    )
    hi = [slice(None)] * nd
    lo = [slice(None)] * nd
    hi[k], lo[k] = slice(1, None), slice(0, -1)
    return 0.5 * (b[tuple(hi)] + b[tuple(lo)])


def _centered_derivative(u, k, j):
    """Centered d_j of component k at its physical faces."""
    g = u.grid
    nd = g.ndim
    c = u.comps[k]
    hi = c[_ix(nd, {j: slice(2, None)})]
    lo = c[_ix(nd, {j: slice(0, -2)})]
    return (hi - lo) / (2.0 * g.spacing[j])


def advective_term(u, v):
    """(v . grad) u with centered differences; list of face-shaped arrays."""
    g = u.grid
    nd = g.ndim
    u.apply_bc()
    v.apply_bc()
    out = []
    for k in range(nd):
        acc = np.zeros(g.face_shape(k))
        for j in range(nd):
            vj = v.face_values(k) if j == k else _interp_comp(v, j, k)
            acc += vj * _centered_derivative(u, k, j)
        out.append(acc)
    return out


def buoyancy_force(n, phi):
    """Face arrays of the density force n * grad(phi)."""
    return [
        face_mean(n, k) * face_diff(phi, k) for k in range(n.grid.ndim)
    ]


def force_pairing(n, phi, w):
    """Integral of (n grad phi) . w over the box."""
    g = w.grid
    total = 0.0
    for k, f in enumerate(buoyancy_force(n, phi)):
        total += float((f * w.face_values(k)).sum())
    return total * g.cell_volume


def step_u(u, n, params, *, mms_source=None, p_init=None, force_cfl=False):
    """Advance the velocity one step; returns (u_new, pressure).

    The returned pressure is the projection multiplier (u_new differs from
    the predictor by -dt times its gradient); it doubles as a warm start
    for the next step.
    """
    if u.grid != n.grid or u.grid != params.phi.grid:
        raise DomainError("velocity, density, and potential grids differ")
    g = u.grid
    u.apply_bc()
    dt = params.dt
    worst = max(
        float(np.max(np.abs(u.face_values(k)))) * dt / g.spacing[k]
        for k in range(g.ndim)
    )
    if worst > params.cfl and not force_cfl:
        raise CflViolation(
            f"velocity Courant number {worst:.3g} exceeds {params.cfl}"
        )
    v = helmholtz_filter(u, params.epsilon, proj_tol=params.proj_tol)
    adv = advective_term(u, v)
    force = buoyancy_force(n, params.phi)
    star = u.copy()
    for k in range(g.ndim):
        upd = laplace_component(u, k) - adv[k] + force[k]
        if mms_source is not None:
            upd = upd + mms_source[k]
        star.face_values(k)[...] += dt * upd
    star.apply_bc()  # re-pins wall faces, so junk wall rows never survive
    return project(star, dt=dt, proj_tol=params.proj_tol, p_init=p_init)


def discrete_energy_residual(u_old, u_new, n, params):
    """Defect of the one-step kinetic energy balance.

    R = [|u_new|^2 - |u_old|^2] / (2 dt) + |grad u_new|^2 - (n grad phi, u_new).

    Time discretization, projection, and advection commutators push R
    negative (extra dissipation); R is reported signed and gated one-sided
    from above.
    """
    dt = params.dt
    kinetic = (vf_norm_sq(u_new) - vf_norm_sq(u_old)) / (2.0 * dt)
    return kinetic + dirichlet_energy(u_new) - force_pairing(n, params.phi, u_new)
