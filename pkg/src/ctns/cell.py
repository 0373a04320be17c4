"""Explicit conservative step for the cell-density equation.

The density moves by degenerate (porous-medium type) diffusion, a saturated
attraction up the signal gradient, and transport by the carrying velocity.
All three contributions are assembled as face fluxes with zero wall flux,
so the total content telescopes exactly.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CflViolation, DomainError, NegativeDensity
from .fields import (
    ScalarField,
    _tup,
    face_diff,
    face_mean,
    flux_divergence,
    upwind_divergence,
)

CLAMP_FLOOR = -1e-14
REGIME_FLOOR = 4.0 / 3.0

FACE_ARITHMETIC = "arithmetic"
FACE_HARMONIC = "harmonic"


@dataclass
class CellStepParams:
    """Parameters of one density step.

    m            diffusion exponent, must exceed 1; values at or below 4/3
                 fall outside the certified regime and only warn
    epsilon      regularization weight in the diffusivity and saturation
    dt           step size
    mms_source   optional interior array added as a manufactured source
    cfl          face-speed Courant bound for the explicit transport part
    face_average how the diffusivity is averaged onto faces
    """

    m: float
    epsilon: float
    dt: float
    mms_source: object = None
    cfl: float = 0.5
    face_average: str = FACE_ARITHMETIC

    def __post_init__(self):
        if not self.m > 1.0:
            raise DomainError(f"diffusion exponent must exceed 1, got {self.m}")
        if self.m <= REGIME_FLOOR:
            warnings.warn(
                f"m={self.m} is at or below 4/3; outside the certified regime",
                stacklevel=2,
            )
        if not (0.0 < self.epsilon <= 1.0):
            raise DomainError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not self.dt > 0.0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.face_average not in (FACE_ARITHMETIC, FACE_HARMONIC):
            raise DomainError(f"unknown face average {self.face_average!r}")


def saturation(s, epsilon):
    """Saturated chemotactic mobility s / (1 + epsilon*s)^3."""
    return s / (1.0 + epsilon * s) ** 3


def _diffusivity_face(n, k, m, epsilon, averaging):
    """Face diffusivity m * (n_face + epsilon)^(m-1)."""
    if averaging == FACE_HARMONIC:
        nd = n.grid.ndim
        P = n.values + epsilon
        lo = P[_tup(nd, k, slice(0, -1), rest=slice(1, -1))]
        hi = P[_tup(nd, k, slice(1, None), rest=slice(1, -1))]
        base = 2.0 * lo * hi / (lo + hi)
    else:
        base = face_mean(n, k) + epsilon
    return m * base ** (m - 1.0)


def degenerate_diffusion_flux(n, params):
    """Per-axis face fluxes m*(n_face+eps)^(m-1) * (n_R - n_L)/h.

    Wall faces are zeroed explicitly (they already vanish through the
    mirror ghosts, but the zero-flux wall is a hard contract).
    """
    n.apply_bc()
    g = n.grid
    fluxes = []
    for k in range(g.ndim):
        fl = _diffusivity_face(n, k, params.m, params.epsilon, params.face_average)
        fl = fl * face_diff(n, k)
        fl[_tup(g.ndim, k, 0)] = 0.0
        fl[_tup(g.ndim, k, -1)] = 0.0
        fluxes.append(fl)
    return fluxes


def chemotaxis_flux(n, c, params):
    """Per-axis face fluxes sat(n_face) * (c_R - c_L)/h with the density
    donor cell picked by the sign of the local signal gradient."""
    n.apply_bc()
    c.apply_bc()
    g = n.grid
    nd = g.ndim
    fluxes = []
    for k in range(nd):
        dc = face_diff(c, k)
        nP = n.values
        lo = nP[_tup(nd, k, slice(0, -1), rest=slice(1, -1))]
        hi = nP[_tup(nd, k, slice(1, None), rest=slice(1, -1))]
        n_up = np.where(dc > 0.0, lo, hi)
        fl = saturation(n_up, params.epsilon) * dc
        fl[_tup(nd, k, 0)] = 0.0
        fl[_tup(nd, k, -1)] = 0.0
        fluxes.append(fl)
    return fluxes


def _check_transport_cfl(n, c, u, params, force_cfl):
    g = n.grid
    worst = 0.0
    for k in range(g.ndim):
        h = g.spacing[k]
        speed = float(np.max(np.abs(u.face_values(k)))) if u is not None else 0.0
        worst = max(worst, speed * params.dt / h)
        if c is not None:
            chemo = float(np.max(np.abs(face_diff(c, k))))
            worst = max(worst, chemo * params.dt / h)
    if worst > params.cfl and not force_cfl:
        raise CflViolation(
            f"transport Courant number {worst:.3g} exceeds {params.cfl}; "
            "reduce dt or pass the force flag"
        )
    return worst


def _diffusion_substeps(n, params):
    """Number of equal substeps keeping explicit diffusion inside its
    stability (and positivity) limit, with a 0.9 safety factor."""
    g = n.grid
    rate = 0.0
    for k in range(g.ndim):
        d_face = _diffusivity_face(n, k, params.m, params.epsilon, params.face_average)
        rate += float(np.max(d_face)) / g.spacing[k] ** 2
    if rate == 0.0:
        return 1
    limit = 0.9 / (2.0 * rate)
    return max(1, int(np.ceil(params.dt / limit)))


def _finish(grid, interior, scale):
    low = float(interior.min())
    if low < CLAMP_FLOOR * max(scale, 1.0):
        raise NegativeDensity(
            f"density reached {low:.3e}; transport is outside its stable regime"
        )
    if low < 0.0:
        np.clip(interior, 0.0, None, out=interior)
    return ScalarField.from_interior(grid, interior)


def step_n(n, c, u, params, *, force_cfl=False):
    """Advance the density one forward-Euler step.

    Returns a new field; conserves the integral exactly up to roundoff
    (plus dt times the integrated source when one is supplied).  When dt
    exceeds the explicit diffusion limit the diffusion part is sub-cycled
    and the transport part is applied once at the full dt.
    """
    if not (n.grid == c.grid == u.grid):
        raise DomainError("density, signal, and velocity grids differ")
    n.apply_bc()
    c.apply_bc()
    u.apply_bc()
    scale = float(np.max(np.abs(n.interior))) if n.interior.size else 1.0
    _check_transport_cfl(n, c, u, params, force_cfl)
    substeps = _diffusion_substeps(n, params)
    dt = params.dt

    if substeps == 1:
        diff = flux_divergence(n.grid, degenerate_diffusion_flux(n, params))
        chem = flux_divergence(n.grid, chemotaxis_flux(n, c, params))
        adv = upwind_divergence(n, u)
        work = n.interior + dt * (diff - chem - adv)
    else:
        stage = n.copy()
        dt_sub = dt / substeps
        for _ in range(substeps):
            diff = flux_divergence(stage.grid, degenerate_diffusion_flux(stage, params))
            stage = ScalarField.from_interior(stage.grid, stage.interior + dt_sub * diff)
        chem = flux_divergence(stage.grid, chemotaxis_flux(stage, c, params))
        adv = upwind_divergence(stage, u)
        work = stage.interior + dt * (-chem - adv)

    if params.mms_source is not None:
        work = work + dt * params.mms_source
    return _finish(n.grid, work, scale)
