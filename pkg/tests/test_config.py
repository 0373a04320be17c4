"""Config round trips, validation, and the initial-data recipes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctns.config import (
    SimConfig,
    build_grid,
    emit_config,
    initial_fields,
    parse_config,
    potential_field,
    read_config,
    reference_config,
)
from ctns.errors import ConfigError
from ctns.fields import div, integrate


CFG_2D = dict(dims=(8, 6), extents=(2.0, 1.5), n_waves=(2, 2),
              c_waves=(2, 0))


def test_reference_defaults():
    cfg = reference_config()
    assert cfg.dims == (16, 16, 16)
    assert cfg.m == 1.5
    assert cfg.epsilon == 0.02
    assert cfg.t_end == 2.0


def test_round_trip_is_exact():
    for cfg in (reference_config(),
                reference_config(**CFG_2D, m=1.8, epsilon=0.1,
                                 dt=2.5e-4, gravity=-0.07,
                                 u_mode="vortex", u_amp=0.3)):
        assert parse_config(emit_config(cfg)) == cfg


def test_read_config_round_trip(tmp_path):
    cfg = reference_config(outdir="elsewhere", t_cut=0.375)
    path = tmp_path / "run.ini"
    path.write_text(emit_config(cfg))
    assert read_config(path) == cfg


@settings(max_examples=40, deadline=None)
@given(
    m=st.floats(1.4, 5.0),
    epsilon=st.floats(1e-6, 1.0),
    dt=st.floats(1e-5, 0.05),
    frac=st.floats(1e-3, 1.0),
    gravity=st.floats(-10.0, 10.0),
    n_amp=st.floats(0.0, 1.4),
)
def test_round_trip_property(m, epsilon, dt, frac, gravity, n_amp):
    # repr-formatted floats must survive the INI text bit for bit
    cfg = reference_config(
        m=m, epsilon=epsilon, dt=dt, t_end=1.0, t_cut=frac,
        snapshot_interval=0.5, gravity=gravity, n_amp=n_amp)
    assert parse_config(emit_config(cfg)) == cfg


def test_unknown_section_and_key():
    with pytest.raises(ConfigError):
        parse_config("[junk]\na = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[grid]\nbogus = 3\n")
    with pytest.raises(ConfigError):
        parse_config("[time]\ndt = fast\n")
    with pytest.raises(ConfigError):
        parse_config("not ini at all")


@pytest.mark.parametrize("overrides", [
    dict(m=1.0),
    dict(epsilon=0.0),
    dict(epsilon=2.0),
    dict(dt=0.0),
    dict(t_end=1e-4),
    dict(t_cut=3.0),
    dict(t_cut=0.0),
    dict(snapshot_interval=1e-4),
    dict(n_waves=(2, 2)),
    dict(n_amp=2.0),
    dict(c_amp=1.5),
    dict(u_mode="swirl"),
    dict(u_amp=-0.1),
    dict(axis=3),
    dict(proj_tol=0.0),
    dict(extents=(2.0, 2.0)),
])
def test_validation_rejects(overrides):
    with pytest.raises(ConfigError):
        reference_config(**overrides)


def test_small_m_warns():
    with pytest.warns(UserWarning):
        reference_config(m=1.3)


def test_initial_integrals_at_reference():
    cfg = reference_config()
    grid = build_grid(cfg)
    n0, c0, u0 = initial_fields(cfg, grid)
    # wavenumber-2 cosines integrate to zero over the box, leaving the
    # base value times the volume: 1.5 * 8 and 1.0 * 8
    assert abs(integrate(n0) - 12.0) <= 1e-12 * 12.0
    assert abs(integrate(c0) - 8.0) <= 1e-12 * 8.0
    assert np.min(n0.interior) >= 0.0
    assert np.min(c0.interior) >= 0.0
    for k in range(3):
        assert np.all(u0.face_values(k) == 0.0)


def test_vortex_recipe():
    cfg = reference_config(**CFG_2D, u_mode="vortex", u_amp=0.7)
    grid = build_grid(cfg)
    _, _, u0 = initial_fields(cfg, grid)
    assert float(np.max(np.abs(div(u0).interior))) <= 1e-13
    peak = max(float(np.max(np.abs(u0.face_values(k)))) for k in range(2))
    assert peak == pytest.approx(0.7, rel=1e-12)
    for k in range(2):
        f = u0.face_values(k)
        assert np.all(np.take(f, [0, -1], axis=k) == 0.0)


def test_potential_axis():
    cfg = reference_config(**CFG_2D, axis=1, gravity=0.4)
    grid = build_grid(cfg)
    phi = potential_field(cfg, grid)
    y = grid.cell_coords(1)
    assert np.allclose(phi.interior[0, :], 0.4 * y, atol=1e-14)
    assert np.allclose(phi.interior[:, 0], phi.interior[0, 0], atol=1e-14)


def test_build_grid_passthrough():
    cfg = reference_config(**CFG_2D)
    grid = build_grid(cfg)
    assert grid.dims == (8, 6)
    assert grid.extents == (2.0, 1.5)
