"""Semi-implicit signal step: positivity, the mass recursion, and a dense
direct-solve oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctns.errors import CflViolation, DomainError, LinearSolveFailure
from ctns.fields import ScalarField, VectorField, integrate
from ctns.grid import Grid
from ctns.signal import solve_shifted_helmholtz, step_c


@pytest.fixture
def g2():
    return Grid((5, 4), (1.0, 0.8))


def _state(grid, rng, u_amp=0.2):
    c = ScalarField.from_interior(
        grid, rng.uniform(0.0, 1.0, size=grid.dims))
    n = ScalarField.from_interior(
        grid, rng.uniform(0.0, 2.0, size=grid.dims))
    u = VectorField.zeros(grid)
    for k in range(grid.ndim):
        u.face_values(k)[...] = rng.uniform(
            -u_amp, u_amp, size=grid.face_shape(k))
    u.apply_bc()
    return c, n, u


def _dense_helmholtz(grid, dt, shift):
    """(shift*I - dt*L) assembled row by row with mirror walls."""
    nx, ny = grid.dims
    hx2, hy2 = grid.spacing[0] ** 2, grid.spacing[1] ** 2
    size = nx * ny
    A = np.zeros((size, size))

    def idx(i, j):
        return i * ny + j

    for i in range(nx):
        for j in range(ny):
            r = idx(i, j)
            A[r, r] = shift
            for di, dj, h2 in ((1, 0, hx2), (-1, 0, hx2),
                               (0, 1, hy2), (0, -1, hy2)):
                ii, jj = i + di, j + dj
                if 0 <= ii < nx and 0 <= jj < ny:
                    A[r, idx(ii, jj)] -= dt / h2
                    A[r, r] += dt / h2
                # mirror wall: the ghost equals the interior cell, so the
                # off-diagonal entry cancels and nothing is added
    return A


def _upwind_rhs(c, n, u, dt):
    """Right-hand side with loop-built upwind transport."""
    g = c.grid
    nx, ny = g.dims
    hx, hy = g.spacing
    c.apply_bc()
    p = c.values
    div_a = np.zeros(g.dims)
    for axis, h in ((0, hx), (1, hy)):
        uk = u.face_values(axis)
        shape = g.face_shape(axis)
        fl = np.zeros(shape)
        for i in range(shape[0]):
            for j in range(shape[1]):
                if axis == 0:
                    cl, cr = p[i, j + 1], p[i + 1, j + 1]
                else:
                    cl, cr = p[i + 1, j], p[i + 1, j + 1]
                vel = uk[i, j]
                fl[i, j] = vel * (cl if vel >= 0.0 else cr)
        if axis == 0:
            div_a += (fl[1:, :] - fl[:-1, :]) / hx
        else:
            div_a += (fl[:, 1:] - fl[:, :-1]) / hy
    return c.interior + dt * (n.interior - div_a)


def test_step_matches_dense_oracle(g2):
    rng = np.random.default_rng(20)
    c, n, u = _state(g2, rng)
    dt = 0.01
    A = _dense_helmholtz(g2, dt, 1.0 + dt)
    rhs = _upwind_rhs(c, n, u, dt)
    want = np.linalg.solve(A, rhs.ravel()).reshape(g2.dims)
    got = step_c(c, n, u, dt, rtol=1e-13)
    assert np.allclose(got.interior, want, rtol=1e-10, atol=1e-12)


def test_mass_recursion(g2):
    # column sums of the implicit operator give the exact one-step identity
    # int c_new = (int c + dt int n) / (1 + dt), transport telescoping away
    rng = np.random.default_rng(21)
    c, n, u = _state(g2, rng)
    dt = 0.02
    for _ in range(10):
        c_new = step_c(c, n, u, dt, rtol=1e-13)
        want = (integrate(c) + dt * integrate(n)) / (1.0 + dt)
        assert abs(integrate(c_new) - want) <= 1e-11 * max(want, 1.0)
        c = c_new


def test_nonnegative_inputs_stay_nonnegative(g2):
    rng = np.random.default_rng(22)
    c, n, u = _state(g2, rng)
    for _ in range(30):
        c = step_c(c, n, u, 0.05, rtol=1e-12)
        # M-matrix: any negativity is bounded by the iterative residual
        assert float(c.interior.min()) >= -1e-10


def test_signal_ceiling_approached_from_data(g2):
    # with production off the signal integral contracts toward zero
    rng = np.random.default_rng(23)
    c, _, u = _state(g2, rng, u_amp=0.0)
    n = ScalarField.zeros(g2)
    vals = [integrate(c)]
    for _ in range(20):
        c = step_c(c, n, u, 0.1)
        vals.append(integrate(c))
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_cfl_gate_and_force(g2):
    rng = np.random.default_rng(24)
    c, n, u = _state(g2, rng, u_amp=0.0)
    u.face_values(0)[1:-1, :] = 40.0
    with pytest.raises(CflViolation):
        step_c(c, n, u, 0.05)
    out = step_c(c, n, u, 0.05, force_cfl=True)
    assert out.interior.shape == g2.dims


def test_bad_dt_raises(g2):
    rng = np.random.default_rng(25)
    c, n, u = _state(g2, rng)
    with pytest.raises(DomainError):
        step_c(c, n, u, 0.0)


def test_solver_budget_exhaustion(g2):
    rng = np.random.default_rng(26)
    rhs = rng.uniform(1.0, 2.0, size=g2.dims)
    with pytest.raises(LinearSolveFailure):
        solve_shifted_helmholtz(g2, rhs, 1.0, 2.0, rtol=1e-15, maxiter=1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mass_recursion_property(seed):
    g = Grid((4, 4), (1.0, 1.0))
    rng = np.random.default_rng(seed)
    c = ScalarField.from_interior(g, rng.uniform(0.0, 1.0, size=g.dims))
    n = ScalarField.from_interior(g, rng.uniform(0.0, 1.0, size=g.dims))
    u = VectorField.zeros(g)
    dt = float(rng.uniform(0.01, 0.2))
    c2 = step_c(c, n, u, dt, rtol=1e-13)
    want = (integrate(c) + dt * integrate(n)) / (1.0 + dt)
    assert abs(integrate(c2) - want) <= 1e-10 * max(want, 1.0)
