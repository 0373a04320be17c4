"""Run configuration: typed INI sections with an exact emit/parse
round-trip, plus the initial-data and potential recipes.

The format is flat key = value under fixed section headers.  Unknown
sections or keys are hard errors; missing ones fall back to the frozen
defaults, which are the reference-run parameters.  Floats are emitted
with repr so parse(emit(cfg)) == cfg bitwise.

The default initial data (smooth cosine bump for the scalars, rest or a
solenoidal vortex mode for the velocity) is an artifact convention: any
nonnegative smooth bump is admissible, and nothing downstream depends on
the particular shape beyond the recorded parameters.
"""

import configparser
import io
import logging
import warnings
from dataclasses import dataclass, fields as _dc_fields

import numpy as np

from .errors import ConfigError
from .fields import ScalarField, VectorField, linear_potential
from .grid import Grid

log = logging.getLogger("ctns")

VERY_WEAK_FLOOR = 4.0 / 3.0
WEAK_FLOOR = 5.0 / 3.0

# Certification tolerances, frozen by the calibration procedure in the
# README: 3x the worst defect measured on manufactured trajectories at
# the reference resolution, epsilon, and snapshot cadence, across both
# certified regimes (m = 1.5 and m = 1.8).  tol_energy covers the
# face-vs-center quadrature mismatch of the per-step balance at the
# buoyancy-viscosity quasi-steady state; tol_weak is dominated by the
# saturation model gap of the standard weak form at fixed epsilon.
DEFAULT_TOL_ENERGY = 1.5e-6
DEFAULT_TOL_SUPER = 0.17
DEFAULT_TOL_WEAK = 0.25

_CONVERTERS = {
    "float": float,
    "int": int,
    "str": str,
    "int_tuple": lambda s: tuple(int(x) for x in s.split(",")),
    "float_tuple": lambda s: tuple(float(x) for x in s.split(",")),
}

_SCHEMA = {
    "grid": {"dims": "int_tuple", "extents": "float_tuple"},
    "model": {"m": "float", "epsilon": "float"},
    "time": {"dt": "float", "t_end": "float"},
    "initial": {
        "n_base": "float", "n_amp": "float", "n_waves": "int_tuple",
        "c_base": "float", "c_amp": "float", "c_waves": "int_tuple",
        "u_mode": "str", "u_amp": "float",
    },
    "potential": {"gravity": "float", "axis": "int"},
    "tolerances": {
        "proj_tol": "float", "cg_rtol": "float", "mass_rtol": "float",
        "signal_floor": "float", "tol_energy": "float",
        "tol_super": "float", "tol_weak": "float",
    },
    "output": {
        "outdir": "str", "snapshot_interval": "float", "t_cut": "float",
    },
}


@dataclass(frozen=True)
class SimConfig:
    """All physical and numerical parameters of one run.

    Defaults are the reference configuration: 16^3 box of extent 2,
    m = 1.5, eps = 0.02, 2000 steps to t = 2.
    """

    dims: tuple = (16, 16, 16)
    extents: tuple = (2.0, 2.0, 2.0)
    m: float = 1.5
    epsilon: float = 0.02
    dt: float = 1e-3
    t_end: float = 2.0
    n_base: float = 1.5
    n_amp: float = 0.5
    n_waves: tuple = (2, 2, 0)
    c_base: float = 1.0
    c_amp: float = 0.2
    c_waves: tuple = (2, 2, 0)
    u_mode: str = "rest"
    u_amp: float = 0.0
    gravity: float = 0.3
    axis: int = 0
    proj_tol: float = 1e-8
    cg_rtol: float = 1e-10
    mass_rtol: float = 1e-12
    signal_floor: float = 1e-11
    tol_energy: float = DEFAULT_TOL_ENERGY
    tol_super: float = DEFAULT_TOL_SUPER
    tol_weak: float = DEFAULT_TOL_WEAK
    outdir: str = "out"
    snapshot_interval: float = 0.05
    t_cut: float = 1.5

    def __post_init__(self):
        nd = len(self.dims)
        if len(self.extents) != nd:
            raise ConfigError("dims and extents arity differ")
        if not self.m > 1.0:
            raise ConfigError(f"m must exceed 1, got {self.m}")
        if self.m <= VERY_WEAK_FLOOR:
            warnings.warn(
                f"m = {self.m} is at or below the very-weak floor 4/3; "
                "no solution identity is certified in this regime",
                stacklevel=2,
            )
        elif self.m > WEAK_FLOOR:
            log.info("m = %g exceeds 5/3: standard weak identities apply",
                     self.m)
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in (0, 1]")
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if self.t_end < self.dt:
            raise ConfigError("t_end shorter than one step")
        if self.snapshot_interval < self.dt:
            raise ConfigError("snapshot interval shorter than one step")
        if not 0.0 < self.t_cut <= self.t_end:
            raise ConfigError("t_cut must lie in (0, t_end]")
        for name in ("n_waves", "c_waves"):
            if len(getattr(self, name)) != nd:
                raise ConfigError(f"{name} arity does not match dims")
        if self.n_base - abs(self.n_amp) < 0.0:
            raise ConfigError("initial density recipe dips below zero")
        if self.c_base - abs(self.c_amp) < 0.0:
            raise ConfigError("initial signal recipe dips below zero")
        if self.u_mode not in ("rest", "vortex"):
            raise ConfigError(f"unknown velocity recipe {self.u_mode!r}")
        if self.u_amp < 0.0:
            raise ConfigError("u_amp must be nonnegative")
        if not 0 <= self.axis < nd:
            raise ConfigError("potential axis outside the grid arity")
        for name in ("proj_tol", "cg_rtol", "mass_rtol", "signal_floor",
                     "tol_energy", "tol_super", "tol_weak"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")

    @property
    def ndim(self):
        return len(self.dims)


def reference_config(**overrides):
    """The frozen reference run, optionally with overridden fields."""
    return SimConfig(**overrides)


def _field_map():
    return {f.name: f for f in _dc_fields(SimConfig)}


def _format_value(v):
    if isinstance(v, tuple):
        return ",".join(repr(x) if isinstance(x, float) else str(x)
                        for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg):
    """Serialize every field under its section; floats via repr."""
    cp = configparser.ConfigParser(interpolation=None)
    for sec, keys in _SCHEMA.items():
        cp.add_section(sec)
        for key in keys:
            cp.set(sec, key, _format_value(getattr(cfg, key)))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_config(text):
    """Parse INI text; unknown sections or keys are hard errors."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    kwargs = {}
    for sec in cp.sections():
        keys = _SCHEMA.get(sec)
        if keys is None:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp[sec].items():
            typ = keys.get(key)
            if typ is None:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            try:
                kwargs[key] = _CONVERTERS[typ](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    f"bad value for {key!r} in [{sec}]: {raw!r}") from exc
    return SimConfig(**kwargs)


def read_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


# -- recipes ------------------------------------------------------------

def build_grid(cfg):
    return Grid(cfg.dims, cfg.extents)


def _cosine_bump(grid, base, amp, waves):
    def fn(*xs):
        term = np.full_like(xs[0], amp)
        for d, k in enumerate(waves):
            term = term * np.cos(np.pi * k * xs[d] / grid.extents[d])
        return base + term

    return ScalarField.from_function(grid, fn)


def _vortex(grid, amp):
    """Solenoidal vortex mode from a discrete potential, scaled so the
    largest face speed equals amp.  Exactly divergence free and no-slip
    compatible (wall-normal faces are identically zero)."""
    from .testfuncs import SolenoidalTestFunction

    if grid.ndim == 2:
        waves = ((1, 1),)
        amps = (1.0,)
    else:
        waves = ((2, 1, 1), (1, 2, 1), (1, 1, 2))
        amps = (1.0, 1.0, 1.0)
    base = SolenoidalTestFunction(
        amplitudes=amps, wavenumbers=waves, t_cut=1.0, power=2,
    ).spatial(grid)
    peak = max(float(np.max(np.abs(base.face_values(k))))
               for k in range(grid.ndim))
    scale = amp / peak if peak > 0.0 else 0.0
    return VectorField.from_face_arrays(
        grid, [base.face_values(k) * scale for k in range(grid.ndim)])


def initial_fields(cfg, grid):
    """(n0, c0, u0) from the configured recipes."""
    n0 = _cosine_bump(grid, cfg.n_base, cfg.n_amp, cfg.n_waves)
    c0 = _cosine_bump(grid, cfg.c_base, cfg.c_amp, cfg.c_waves)
    if cfg.u_mode == "vortex" and cfg.u_amp > 0.0:
        u0 = _vortex(grid, cfg.u_amp)
    else:
        u0 = VectorField.zeros(grid)
    return n0, c0, u0


def potential_field(cfg, grid):
    return linear_potential(grid, cfg.gravity, axis=cfg.axis)
