"""Semi-implicit step for the signal equation.

Diffusion and decay are treated implicitly, production by the density and
upwind transport explicitly:

    (I - dt*L + dt*I) c_new = c + dt*(n - div(c_up u)) + dt*source

with L the zero-flux cell Laplacian.  The implicit operator is an
M-matrix, so nonnegative right-hand sides stay nonnegative, and its column
sums make the discrete mass obey the same one-step bound as the continuum
integral identity.
"""

import numpy as np

from .errors import CflViolation, DomainError
from .fields import ScalarField, _tup, upwind_divergence
from .linsolve import pcg

CG_TOL = 1e-10


def _helmholtz_diag(grid, dt, shift):
    """Diagonal of shift*I - dt*L with mirror-ghost walls."""
    diag = np.full(grid.dims, shift)
    nd = grid.ndim
    for k in range(nd):
        h2 = grid.spacing[k] ** 2
        diag += 2.0 * dt / h2
        diag[_tup(nd, k, 0)] -= dt / h2
        diag[_tup(nd, k, -1)] -= dt / h2
    return diag


def _apply_helmholtz(grid, x, dt, shift):
    f = ScalarField.from_interior(grid, x)
    out = shift * x.copy()
    nd = grid.ndim
    P = f.values
    for k in range(nd):
        h2 = grid.spacing[k] ** 2
        hi = P[_tup(nd, k, slice(2, None), rest=slice(1, -1))]
        mid = P[_tup(nd, k, slice(1, -1), rest=slice(1, -1))]
        lo = P[_tup(nd, k, slice(0, -2), rest=slice(1, -1))]
        out -= dt * (hi - 2.0 * mid + lo) / h2
    return out


def solve_shifted_helmholtz(grid, rhs, dt, shift, *, rtol=CG_TOL, maxiter=None,
                            x0=None, name="signal solve"):
    """Solve (shift*I - dt*L) x = rhs with zero-flux walls via Jacobi-PCG."""
    if maxiter is None:
        maxiter = 10 * max(grid.dims)
    diag = _helmholtz_diag(grid, dt, shift)
    return pcg(
        lambda x: _apply_helmholtz(grid, x, dt, shift),
        rhs,
        x0=x0,
        diag=diag,
        rtol=rtol,
        maxiter=maxiter,
        name=name,
    )


def step_c(c, n, u, dt, *, mms_source=None, cfl=0.5, force_cfl=False,
           rtol=CG_TOL, c_prev_solution=None):
    """Advance the signal one step; returns a new field."""
    if not (c.grid == n.grid == u.grid):
        raise DomainError("signal, density, and velocity grids differ")
    if dt <= 0.0:
        raise DomainError(f"dt must be positive, got {dt}")
    c.apply_bc()
    n.apply_bc()
    u.apply_bc()
    g = c.grid
    worst = max(
        float(np.max(np.abs(u.face_values(k)))) * dt / g.spacing[k]
        for k in range(g.ndim)
    )
    if worst > cfl and not force_cfl:
        raise CflViolation(
            f"signal transport Courant number {worst:.3g} exceeds {cfl}"
        )
    rhs = c.interior + dt * (n.interior - upwind_divergence(c, u))
    if mms_source is not None:
        rhs = rhs + dt * mms_source
    sol = solve_shifted_helmholtz(
        g, rhs, dt, 1.0 + dt, rtol=rtol, x0=c_prev_solution, name="signal step"
    )
    return ScalarField.from_interior(g, sol)
