"""Chemotaxis-fluid simulator with degenerate nonlinear diffusion.

Structured MAC-grid solver for the coupled cell/signal/velocity system,
a diagnostics ledger of the monitored a-priori bounds, and a residual
certifier for the weak and very-weak solution identities.
"""

from .config import SimConfig, parse_config, emit_config, read_config, reference_config
from .diagnostics import (
    DiagnosticsLedger,
    dissipation_g,
    functional_y,
    gn_interp_exponent,
    ode_comparison_bound,
    st_bound_exponent,
    verify_ode_comparison,
)
from .errors import (
    CflViolation,
    ConfigError,
    DomainError,
    InvariantViolation,
    LinearSolveFailure,
    NegativeDensity,
    SimulationError,
    SupportMismatch,
)
from .fields import BC_FIXED, BC_NEUMANN, BC_NOSLIP, ScalarField, VectorField
from .grid import Grid
from .residuals import (
    c2_inequality_check,
    certify,
    render_report,
    residual_c_weak,
    residual_n_tested,
    residual_n_weak,
    residual_u_weak,
    supersolution_residual,
)
from .run import run_epsilon_sweep, run_mms, run_regime_compare, run_single
from .trajectory import TrajectoryRecord, steady_constant_record

__version__ = "0.1.0"

__all__ = [
    "BC_FIXED", "BC_NEUMANN", "BC_NOSLIP",
    "CflViolation", "ConfigError", "DiagnosticsLedger", "DomainError",
    "Grid", "InvariantViolation", "LinearSolveFailure", "NegativeDensity",
    "ScalarField", "SimConfig", "SimulationError", "SupportMismatch",
    "TrajectoryRecord", "VectorField",
    "c2_inequality_check", "certify", "dissipation_g", "emit_config",
    "functional_y", "gn_interp_exponent", "ode_comparison_bound",
    "parse_config", "read_config", "reference_config", "render_report",
    "residual_c_weak", "residual_n_tested", "residual_n_weak",
    "residual_u_weak", "run_epsilon_sweep", "run_mms",
    "run_regime_compare", "run_single", "st_bound_exponent",
    "steady_constant_record", "supersolution_residual",
    "verify_ode_comparison",
]
