"""Manufactured problems: the derived sources must close the continuum
equations, and the march drivers must hold exact steady states."""

import numpy as np
import pytest

from ctns.errors import DomainError
from ctns.grid import Grid
from ctns.mms import (
    ManufacturedProblem,
    _march_coupled,
    decay_test_functions,
    exact_c,
    exact_n,
    exact_u,
    level_grid,
    run_decoupled_study,
    sources,
)

PROB_2D = ManufacturedProblem(
    ndim=2, extents=(1.0, 1.0), m=1.7, epsilon=0.05,
    n_base=1.5, n_amp=0.4, c_base=1.0, c_amp=0.2,
    u_amp=0.08, gravity=0.25)


# -- finite-difference closure of the sources ---------------------------------
#
# The sources are generated symbolically; the cross-check below rebuilds
# the PDE residual of the exact fields from raw centered stencils and a
# hand chain rule.  A wrong or missing term would leave an O(1) defect
# that does not shrink under refinement.


def _ax(nd, k, sl):
    out = [slice(None)] * nd
    out[k] = sl
    return tuple(out)


def _d1(a, h, k):
    out = np.full_like(a, np.nan)
    nd = a.ndim
    out[_ax(nd, k, slice(1, -1))] = (
        a[_ax(nd, k, slice(2, None))] - a[_ax(nd, k, slice(0, -2))]
    ) / (2.0 * h)
    return out


def _d2(a, h, k):
    out = np.full_like(a, np.nan)
    nd = a.ndim
    out[_ax(nd, k, slice(1, -1))] = (
        a[_ax(nd, k, slice(2, None))]
        - 2.0 * a[_ax(nd, k, slice(1, -1))]
        + a[_ax(nd, k, slice(0, -2))]
    ) / (h * h)
    return out


def _center_faces(arr, k):
    nd = arr.ndim
    return 0.5 * (arr[_ax(nd, k, slice(0, -1))] + arr[_ax(nd, k, slice(1, None))])


def _pde_defects(problem, dims, t):
    grid = Grid(dims, problem.extents)
    h = grid.spacing
    dt = 1e-5
    nd = problem.ndim
    m, eps = problem.m, problem.epsilon

    n = exact_n(problem, grid, t).interior
    c = exact_c(problem, grid, t).interior
    uf = exact_u(problem, grid, t)
    uc = [_center_faces(uf.face_values(k), k) for k in range(nd)]

    n_t = (exact_n(problem, grid, t + dt).interior
           - exact_n(problem, grid, t - dt).interior) / (2.0 * dt)
    c_t = (exact_c(problem, grid, t + dt).interior
           - exact_c(problem, grid, t - dt).interior) / (2.0 * dt)

    dn = [_d1(n, h[k], k) for k in range(nd)]
    dc = [_d1(c, h[k], k) for k in range(nd)]
    lap_n = sum(_d2(n, h[k], k) for k in range(nd))
    lap_c = sum(_d2(c, h[k], k) for k in range(nd))

    # div(D grad n) = D lap n + D'(n) |grad n|^2, D = m (n+eps)^{m-1}
    diff_d = m * (n + eps) ** (m - 1.0)
    diff_dp = m * (m - 1.0) * (n + eps) ** (m - 2.0)
    diffusion = diff_d * lap_n + diff_dp * sum(g * g for g in dn)

    # div(S grad c) = S lap c + S'(n) grad n . grad c,
    # S = n / (1 + eps n)^3, S' = (1 - 2 eps n) / (1 + eps n)^4
    sat = n / (1.0 + eps * n) ** 3
    sat_p = (1.0 - 2.0 * eps * n) / (1.0 + eps * n) ** 4
    chem = sat * lap_c + sat_p * sum(gn * gc for gn, gc in zip(dn, dc))

    made = sources(problem, grid)
    def_n = (n_t + sum(uc[k] * dn[k] for k in range(nd))
             - diffusion + chem - made["n"](t))
    def_c = (c_t + sum(uc[k] * dc[k] for k in range(nd))
             - lap_c + c - n - made["c"](t))

    su = [_center_faces(made["u"](t)[k], k) for k in range(nd)]
    up = exact_u(problem, grid, t + dt)
    um = exact_u(problem, grid, t - dt)
    grav = [problem.gravity] + [0.0] * (nd - 1)
    def_us = []
    for k in range(nd):
        u_t = _center_faces(
            (up.face_values(k) - um.face_values(k)) / (2.0 * dt), k)
        adv = sum(uc[j] * _d1(uc[k], h[j], j) for j in range(nd))
        lap = sum(_d2(uc[k], h[j], j) for j in range(nd))
        def_us.append(u_t + adv - lap - n * grav[k] - su[k])

    trim = tuple(slice(1, -1) for _ in range(nd))
    scale_n = float(np.max(np.abs(made["n"](t)))) + 1.0
    scale_c = float(np.max(np.abs(made["c"](t)))) + 1.0
    scale_u = max(float(np.max(np.abs(a))) for a in su) + 1.0
    return (
        float(np.max(np.abs(def_n[trim]))) / scale_n,
        float(np.max(np.abs(def_c[trim]))) / scale_c,
        max(float(np.max(np.abs(d[trim]))) for d in def_us) / scale_u,
    )


def test_sources_close_the_pde_2d():
    coarse = _pde_defects(PROB_2D, (32, 32), t=0.3)
    fine = _pde_defects(PROB_2D, (64, 64), t=0.3)
    for dc, df in zip(coarse, fine):
        assert df <= 1e-2
        # centered stencils: defect must fall near fourfold per halving
        assert df <= 0.35 * dc


def test_sources_close_the_pde_3d():
    prob = ManufacturedProblem(ndim=3, extents=(1.0, 1.0, 1.0))
    coarse = _pde_defects(prob, (12, 12, 12), t=0.2)
    fine = _pde_defects(prob, (24, 24, 24), t=0.2)
    for dc, df in zip(coarse, fine):
        assert df <= 5e-2
        assert df <= 0.35 * dc


# -- exact steady state under the full march -----------------------------------


def test_constant_state_is_preserved_by_coupled_march():
    # flat fields with n = c: every source vanishes except the momentum
    # one, which must cancel the buoyancy force identically
    prob = ManufacturedProblem(
        ndim=2, extents=(1.0, 1.0), n_amp=0.0, c_amp=0.0, u_amp=0.0,
        n_base=1.0, c_base=1.0, gravity=0.3)
    grid = level_grid(prob, 0)
    rec = _march_coupled(prob, grid, dt_factor=0.05, t_end=0.01,
                         snap_parts=2)
    assert np.max(np.abs(rec.n[-1].interior - 1.0)) <= 1e-12
    assert np.max(np.abs(rec.c[-1].interior - 1.0)) <= 1e-12
    for k in range(2):
        assert np.max(np.abs(rec.u[-1].face_values(k))) <= 1e-12


# -- refinement behavior ---------------------------------------------------------


def test_decoupled_orders_2d_quick():
    quiet = ManufacturedProblem(
        ndim=2, extents=(1.0, 1.0), c_amp=0.02, u_amp=0.01)
    out = run_decoupled_study(quiet, kinds=("n", "c"), levels=(0, 1))
    for kind in ("n", "c"):
        assert out[kind]["orders"][0] >= 1.3


def test_level_grid_doubles():
    assert level_grid(PROB_2D, 0).dims == (8, 8)
    assert level_grid(PROB_2D, 2).dims == (32, 32)
    g0 = level_grid(PROB_2D, 0)
    g1 = level_grid(PROB_2D, 1)
    assert np.allclose(np.array(g0.spacing), 2.0 * np.array(g1.spacing))


# -- evaluators ------------------------------------------------------------------


def test_exact_field_shapes_and_walls():
    prob = ManufacturedProblem(ndim=3, extents=(1.0, 1.0, 1.0))
    grid = Grid((6, 5, 4), prob.extents)
    assert exact_n(prob, grid, 0.1).interior.shape == grid.dims
    assert exact_c(prob, grid, 0.1).interior.shape == grid.dims
    u = exact_u(prob, grid, 0.1)
    for k in range(3):
        assert u.face_values(k).shape == grid.face_shape(k)
    # the sin^2 node profiles vanish on their own-axis walls
    assert np.all(u.face_values(0)[0, :, :] == 0.0)
    assert np.all(u.face_values(0)[-1, :, :] == 0.0)
    assert np.all(u.face_values(2) == 0.0)


def test_source_callbacks_memoize():
    grid = level_grid(PROB_2D, 0)
    made = sources(PROB_2D, grid)
    assert made["n"](0.5) is made["n"](0.5)
    assert made["u"](0.25) is made["u"](0.25)


def test_problem_validation():
    with pytest.raises(DomainError):
        ManufacturedProblem(ndim=4, extents=(1.0,) * 4)
    with pytest.raises(DomainError):
        ManufacturedProblem(ndim=2, extents=(1.0, 1.0, 1.0))
    with pytest.raises(DomainError):
        ManufacturedProblem(ndim=2, extents=(1.0, 1.0), n_amp=2.0)
    with pytest.raises(DomainError):
        ManufacturedProblem(ndim=2, extents=(1.0, 1.0), c_amp=1.5)


def test_decay_functions_are_matched_to_the_flow():
    scalar, sol = decay_test_functions(3, t_cut=0.1)
    grid = Grid((8, 8, 8), (1.0, 1.0, 1.0))
    psi = sol.spatial(grid)
    u = exact_u(ManufacturedProblem(), grid, 0.0)
    overlap = sum(
        float(np.sum(u.face_values(k) * psi.face_values(k))) for k in range(3))
    # a fully orthogonal pairing would reduce the decay study to roundoff
    assert abs(overlap) > 1e-10
    assert scalar.t_cut == 0.1
