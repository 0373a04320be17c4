"""Time-series ledger of every a-priori bounded quantity.

Tracks per sample: cell mass, signal L1 norm, the branch functional y and
its dissipation g, and kinetic energy.  Per unit-time window [k, k+1] it
accumulates the space-time integrals that the m > 4/3 regime keeps
bounded: |grad (n+eps)^(m-1)|^2, |grad c|^2, |grad u|^2, and the L^p
power of n+eps with the critical exponent.

The bounds come with unknown constants, so assertions built on the ledger
test sign, monotonicity, finiteness, and stability across the
regularization sweep rather than absolute values.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fields import ScalarField, grad_sq_integral, integrate, lp_norm, vf_norm_sq
from .fluid import dirichlet_energy

REGIME_FLOOR = 4.0 / 3.0
ST_NORM_P = 6.0 / 5.0
WINDOW_SLACK = 1e-9


def _check_m(m):
    if not m > REGIME_FLOOR:
        raise DomainError(
            f"functional branches require m > 4/3, got {m}"
        )


def functional_y(n, c, epsilon, m):
    """Branch functional driving the sublinear a-priori estimate.

    For m in (4/3, 2) the n-term enters with negative sign, so
    y <= ((2-m)/m) * int c^2 holds pointwise in time.  m = 2 switches to
    the entropy int n ln n; m > 2 flips both prefactors positive.
    """
    _check_m(m)
    nn = n.interior
    vol = n.grid.cell_volume
    if m == 2.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = np.where(nn > 0.0, nn * np.log(np.maximum(nn, 1e-300)), 0.0)
        return float(ent.sum()) * vol
    int_pow = float(((nn + epsilon) ** (m - 1.0)).sum()) * vol
    int_c2 = float((c.interior ** 2).sum()) * vol
    if m < 2.0:
        return -int_pow / (m - 1.0) + (2.0 - m) / m * int_c2
    return int_pow / (m - 1.0) + (m - 2.0) / m * int_c2


def dissipation_g(n, c, epsilon, m):
    """Gradient dissipation paired with functional_y; nonnegative."""
    _check_m(m)
    g = n.grid
    if m == 2.0:
        w = ScalarField.from_interior(g, n.interior + epsilon)
        return grad_sq_integral(w) + 0.25 * grad_sq_integral(c)
    w = ScalarField.from_interior(g, (n.interior + epsilon) ** (m - 1.0))
    grad_w = grad_sq_integral(w)
    grad_c = grad_sq_integral(c)
    if m < 2.0:
        pref_n = m * (2.0 - m) / (4.0 * (m - 1.0) ** 2)
        pref_c = (2.0 - m) / (2.0 * m)
    else:
        pref_n = m * (m - 2.0) / (4.0 * (m - 1.0) ** 2)
        pref_c = (m - 2.0) / (2.0 * m)
    return pref_n * grad_w + pref_c * grad_c


def st_bound_exponent(m, p):
    """Critical space-time power 2p(m - 7/6)/(p - 1) of ||n+eps||_p.

    Defined for m >= 4/3 (the equality case anchors the L^{6/5} square
    bound) and p inside the open interval (1, 6(m-1)).
    """
    if m < REGIME_FLOOR:
        raise DomainError(f"exponent requires m >= 4/3, got {m}")
    if not (1.0 < p < 6.0 * (m - 1.0)):
        raise DomainError(
            f"p must lie in (1, {6.0 * (m - 1.0)}), got {p}"
        )
    return 2.0 * p * (m - 7.0 / 6.0) / (p - 1.0)


def gn_interp_exponent(m, p):
    """Interpolation weight a = (p-1)/p * 6(m-1)/(6m-7), inside (0, 1].

    The right endpoint p = 6(m-1) gives a = 1 exactly (the cancellation
    is returned exactly rather than recomputed through rounding).
    """
    if not m > 7.0 / 6.0:
        raise DomainError(f"weight requires m > 7/6, got {m}")
    p_max = 6.0 * (m - 1.0)
    if not (1.0 < p <= p_max):
        raise DomainError(f"p must lie in (1, {p_max}], got {p}")
    if p == p_max:
        return 1.0
    return (p - 1.0) / p * 6.0 * (m - 1.0) / (6.0 * m - 7.0)


def ode_comparison_bound(y0, a, b):
    """Ceiling max{y0 + b, b/a + 2b} for y' + a y <= h with unit-window
    integrals of h at most b."""
    return max(y0 + b, b / a + 2.0 * b)


def verify_ode_comparison(y_samples, a, b):
    """True when every sample respects the comparison ceiling (with a
    1e-9 relative slack for quadrature noise in the sampled data)."""
    y = np.asarray(y_samples, dtype=float)
    bound = ode_comparison_bound(float(y[0]), a, b)
    return bool(np.all(y <= bound * (1.0 + 1e-9)))


@dataclass
class _Window:
    start: int
    grad_nm1_sq: float = 0.0
    grad_c_sq: float = 0.0
    grad_u_sq: float = 0.0
    st_power: float = 0.0


@dataclass
class DiagnosticsLedger:
    """Single-writer accumulator of per-sample and per-window series."""

    m: float
    epsilon: float
    times: list = field(default_factory=list)
    mass_n: list = field(default_factory=list)
    l1_c: list = field(default_factory=list)
    y_func: list = field(default_factory=list)
    g_diss: list = field(default_factory=list)
    energy_u: list = field(default_factory=list)
    windows: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_m(self.m)
        self.st_exponent = st_bound_exponent(self.m, ST_NORM_P)
        self._c2_int = []

    def record_step(self, t, n, c, u, dt):
        """Append one sample; dt > 0 also credits [t-dt, t] to its window.

        The initial state is recorded with dt = 0.  Window credit goes to
        the window containing the step midpoint, so steps crossing an
        integer boundary are never split.
        """
        if self.times and not t > self.times[-1]:
            raise DomainError("sample times must increase strictly")
        self.times.append(t)
        self.mass_n.append(integrate(n))
        self.l1_c.append(lp_norm(c, 1.0))
        g_val = dissipation_g(n, c, self.epsilon, self.m)
        self.y_func.append(functional_y(n, c, self.epsilon, self.m))
        self.g_diss.append(g_val)
        self.energy_u.append(vf_norm_sq(u))
        self._c2_int.append(
            float((c.interior ** 2).sum()) * c.grid.cell_volume
        )
        if dt > 0.0:
            k = int(np.floor(t - 0.5 * dt))
            if k >= 0:
                w = self.windows.setdefault(k, _Window(start=k))
                grad_c = grad_sq_integral(c)
                nm1 = ScalarField.from_interior(
                    n.grid, (n.interior + self.epsilon) ** (self.m - 1.0)
                )
                w.grad_nm1_sq += dt * grad_sq_integral(nm1)
                w.grad_c_sq += dt * grad_c
                w.grad_u_sq += dt * dirichlet_energy(u)
                st = float(
                    ((n.interior + self.epsilon) ** ST_NORM_P).sum()
                ) * n.grid.cell_volume
                w.st_power += dt * st ** (self.st_exponent / ST_NORM_P)
        return self

    # -- queries ----------------------------------------------------------

    def complete_windows(self):
        """Windows fully covered by recorded samples, in time order."""
        if not self.times:
            return []
        t_last = self.times[-1]
        return [
            self.windows[k]
            for k in sorted(self.windows)
            if t_last >= k + 1.0 - WINDOW_SLACK
        ]

    def max_rel_mass_drift(self):
        m0 = self.mass_n[0]
        return max(abs(v - m0) for v in self.mass_n) / abs(m0)

    def l1_c_ceiling_ok(self, rel_tol=1e-6):
        cap = max(self.mass_n[0], self.l1_c[0]) * (1.0 + rel_tol)
        return all(v <= cap for v in self.l1_c)

    def min_g(self):
        return min(self.g_diss)

    def max_y_minus_c2_bound(self):
        """For m < 2: largest y - ((2-m)/m) int c^2 over samples; the
        n-term sign makes this nonpositive always."""
        if not self.m < 2.0:
            raise DomainError("c^2 ceiling on y applies to m < 2 only")
        pref = (2.0 - self.m) / self.m
        return max(
            y - pref * c2 for y, c2 in zip(self.y_func, self._c2_int)
        )

    def sup_y(self):
        return max(self.y_func)

    # -- export -----------------------------------------------------------

    def samples_csv(self, path):
        """One row per sample; repr floats keep files bit-reproducible."""
        with open(path, "w") as fh:
            fh.write("t,mass_n,l1_c,y,g,energy_u\n")
            for row in zip(
                self.times, self.mass_n, self.l1_c,
                self.y_func, self.g_diss, self.energy_u,
            ):
                fh.write(",".join(repr(v) for v in row) + "\n")

    def windows_csv(self, path):
        with open(path, "w") as fh:
            fh.write(
                "t_start,int_grad_nm1_sq,int_grad_c_sq,int_grad_u_sq,"
                "st_power_p,value\n"
            )
            for w in self.complete_windows():
                row = (
                    float(w.start), w.grad_nm1_sq, w.grad_c_sq,
                    w.grad_u_sq, ST_NORM_P, w.st_power,
                )
                fh.write(",".join(repr(v) for v in row) + "\n")


def record_step(ledger, state, epsilon, m, dt):
    """Functional wrapper: state is (t, n, c, u)."""
    if epsilon != ledger.epsilon or m != ledger.m:
        raise DomainError("ledger was created for different (m, epsilon)")
    t, n, c, u = state
    return ledger.record_step(t, n, c, u, dt)
