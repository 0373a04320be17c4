"""Shared fixtures.

The expensive products (the canonical run, the epsilon sweep, the
manufactured-solution study, the regime comparison) are session scoped so
the acceptance suite and the unit suites share a single computation of
each.  Every fixture also records its wall-clock cost because some
acceptance gates carry a runtime budget.
"""

import time

import pytest

from ctns.config import reference_config
from ctns.run import (
    run_epsilon_sweep,
    run_mms,
    run_regime_compare,
    run_single,
)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def reference_run():
    """Canonical gated run: 16^3, m = 1.5, eps = 0.02, t to 2.

    Returns (trajectory, ledger, elapsed seconds).
    """
    (traj, ledger), dt = _timed(lambda: run_single(reference_config()))
    return traj, ledger, dt


@pytest.fixture(scope="session")
def sweep_report():
    """Epsilon ladder 0.1 / 0.03 / 0.01 at the canonical resolution."""
    rep, dt = _timed(
        lambda: run_epsilon_sweep(reference_config(), [0.1, 0.03, 0.01]))
    return rep, dt


@pytest.fixture(scope="session")
def mms_report():
    """Three-level manufactured-solution study, finest level 32^3."""
    cfg = reference_config(
        dims=(8, 8, 8), extents=(1.0, 1.0, 1.0), epsilon=1e-8)
    rep, dt = _timed(lambda: run_mms(cfg, levels=3))
    return rep, dt


@pytest.fixture(scope="session")
def compare_reports():
    """The regime comparison executed twice on identical configuration;
    the two reports must render byte-identically."""
    cfg = reference_config(dims=(8, 8, 8), dt=2e-3)
    first = run_regime_compare(cfg)
    second = run_regime_compare(cfg)
    return first, second
