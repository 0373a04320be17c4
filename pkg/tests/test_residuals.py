"""Certificate evaluators: exact steady states, linearity, regime gating,
and the suite driver."""

import numpy as np
import pytest

from ctns.errors import DomainError
from ctns.fields import linear_potential
from ctns.grid import Grid
from ctns.residuals import (
    c2_inequality_check,
    certify,
    n_weak_in_theory,
    render_report,
    residual_c_weak,
    residual_n_tested,
    residual_n_weak,
    residual_u_weak,
    supersolution_residual,
)
from ctns.testfuncs import (
    CombinedScalarTestFunction,
    ScalarTestFunction,
    SolenoidalTestFunction,
)
from ctns.trajectory import steady_constant_record

T_CUT = 1.5


@pytest.fixture(scope="module")
def steady():
    g = Grid((6, 5), (1.0, 0.8))
    phi = linear_potential(g, 0.3)
    return steady_constant_record(
        g, n_value=0.7, c_value=0.7, m=1.5, epsilon=0.05, phi=phi)


@pytest.fixture(scope="module")
def steady_weak():
    g = Grid((6, 5), (1.0, 0.8))
    phi = linear_potential(g, 0.3)
    return steady_constant_record(
        g, n_value=0.7, c_value=0.7, m=1.8, epsilon=0.05, phi=phi)


def _tf(seed=0, nonneg=False):
    return ScalarTestFunction.random(
        np.random.default_rng(seed), ndim=2, t_cut=T_CUT, nonnegative=nonneg)


def _psi(seed=0):
    return SolenoidalTestFunction.random(
        np.random.default_rng(seed), ndim=2, t_cut=T_CUT)


# -- exact steady states -------------------------------------------------------


def test_steady_constants_all_identities(steady, steady_weak):
    # a constant pair with n = c and u = 0 solves the system classically,
    # so every residual must vanish to quadrature roundoff
    for seed in range(5):
        assert abs(residual_c_weak(steady, _tf(seed))) <= 1e-8
        assert abs(residual_n_tested(steady, _tf(seed))) <= 1e-8
        assert abs(residual_n_weak(steady_weak, _tf(seed))) <= 1e-8
        assert abs(residual_u_weak(steady, _psi(seed))) <= 1e-8
        assert abs(supersolution_residual(steady, _tf(seed, nonneg=True))) <= 1e-8
    for t in steady.times[1:]:
        assert c2_inequality_check(steady, t) >= -1e-12


def test_linearity_in_the_test_function(steady):
    tf1 = _tf(1)
    tf2 = ScalarTestFunction.random(
        np.random.default_rng(2), ndim=2, t_cut=0.8)
    comb = CombinedScalarTestFunction([(2.0, tf1), (-0.5, tf2)])
    want = 2.0 * residual_c_weak(steady, tf1) - 0.5 * residual_c_weak(steady, tf2)
    got = residual_c_weak(steady, comb)
    assert abs(got - want) <= 1e-12
    want = (2.0 * residual_n_tested(steady, tf1)
            - 0.5 * residual_n_tested(steady, tf2))
    assert abs(residual_n_tested(steady, comb) - want) <= 1e-12


# -- regime gating ---------------------------------------------------------------


def test_n_weak_regime_predicate():
    assert not n_weak_in_theory(1.5)
    assert not n_weak_in_theory(5.0 / 3.0)
    assert n_weak_in_theory(1.7)


def test_supersolution_regime_validation(steady):
    bad = steady_constant_record(
        steady.grid, n_value=0.7, c_value=0.7, m=2.5, epsilon=0.05)
    with pytest.raises(DomainError):
        supersolution_residual(bad, _tf(0, nonneg=True))


def test_supersolution_requires_nonnegative_tf(steady):
    with pytest.raises(DomainError):
        supersolution_residual(steady, _tf(0, nonneg=False))


def test_u_weak_needs_potential(steady):
    rec = steady_constant_record(
        steady.grid, n_value=0.7, c_value=0.7, m=1.5, epsilon=0.05)
    with pytest.raises(DomainError):
        residual_u_weak(rec, _psi(0))


# -- suite driver ----------------------------------------------------------------


def test_certify_line_counts_very_weak(steady):
    lines = certify(steady, seed=0, tol_super=0.1, tol_weak=0.1)
    kinds = {}
    for line in lines:
        kinds[line.identity] = kinds.get(line.identity, 0) + 1
    # m = 1.5: no standard weak certificate, everything else present
    assert kinds["n_super"] == 20
    assert "n_weak" not in kinds
    assert kinds["c_energy"] == len(steady.times) - 1
    assert kinds["c_weak"] == 3
    assert kinds["n_tested"] == 3
    assert kinds["u_weak"] == 3
    assert all(line.passed for line in lines)


def test_certify_line_counts_weak_regime(steady_weak):
    lines = certify(steady_weak, seed=0, tol_super=0.1, tol_weak=0.1)
    kinds = {}
    for line in lines:
        kinds[line.identity] = kinds.get(line.identity, 0) + 1
    assert kinds["n_weak"] == 20
    # m = 1.8 still sits inside (4/3, 2): both certificates run
    assert kinds["n_super"] == 20


def test_certify_deterministic_in_seed(steady):
    a = certify(steady, seed=3, tol_super=0.1, tol_weak=0.1)
    b = certify(steady, seed=3, tol_super=0.1, tol_weak=0.1)
    assert [(x.identity, x.residual) for x in a] == [
        (x.identity, x.residual) for x in b]
    c = certify(steady, seed=4, tol_super=0.1, tol_weak=0.1)
    assert [x.residual for x in a] != [x.residual for x in c]


def test_certify_without_weak_tolerance(steady):
    lines = certify(steady, seed=0, tol_super=0.1)
    kinds = {line.identity for line in lines}
    assert kinds == {"n_super", "c_energy"}


def test_render_report_shape(steady):
    lines = certify(steady, seed=0, tol_super=0.1, tol_weak=0.1)
    text = render_report(lines, header="steady")
    rows = text.strip().split("\n")
    assert rows[0] == "steady"
    assert rows[-1].endswith("checks, 0 failures")
    assert len(rows) == len(lines) + 2


def test_failed_lines_are_flagged(steady):
    lines = certify(steady, seed=0, tol_super=1e-300, tol_weak=1e-300)
    text = render_report(lines)
    # constants sit at roundoff, far above an impossible tolerance
    assert "FAIL" in text
    assert not all(line.passed for line in lines)
