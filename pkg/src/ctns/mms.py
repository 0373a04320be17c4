"""Manufactured-solution studies for the coupled solver.

A smooth field triple (n, c, u) is chosen so that walls are compatible
(zero normal derivative for the scalars, u built from sine factors that
vanish on every wall) and u is analytically divergence free.  Sources
that make the triple an exact solution of the regularized system are
derived symbolically and injected through the steppers' source hooks, so
the marching code runs unmodified.

The velocity filter is switched off in these runs (identity operator):
the sources are derived for the unfiltered convective term, and the
filter would otherwise contribute an O(epsilon) model error that does
not vanish under grid refinement.

Error norms are discrete L2 at the final time; observed orders are the
log2 ratios between consecutive refinement levels.
"""

from dataclasses import dataclass, replace

import numpy as np

from .cell import CellStepParams, step_n
from .errors import DomainError, InvariantViolation
from .fields import ScalarField, VectorField, div, integrate, linear_potential
from .fluid import FluidStepParams, project, step_u
from .signal import step_c
from .trajectory import TrajectoryRecord

_DERIVED = {}


@dataclass(frozen=True)
class ManufacturedProblem:
    """Parameters of one manufactured run.

    Amplitudes keep the density and signal well away from zero so the
    degenerate diffusivity stays in its smooth range.
    """

    ndim: int = 3
    extents: tuple = (1.0, 1.0, 1.0)
    m: float = 1.5
    epsilon: float = 0.02
    n_base: float = 1.5
    n_amp: float = 0.5
    c_base: float = 1.0
    c_amp: float = 0.25
    u_amp: float = 0.05
    gravity: float = 0.1

    def __post_init__(self):
        if self.ndim not in (2, 3):
            raise DomainError("manufactured runs support 2 or 3 axes")
        if len(self.extents) != self.ndim:
            raise DomainError("extents arity does not match ndim")
        if self.n_base - abs(self.n_amp) <= 0.0:
            raise DomainError("manufactured density must stay positive")
        if self.c_base - abs(self.c_amp) <= 0.0:
            raise DomainError("manufactured signal must stay positive")


def _expressions(problem):
    """Sympy expressions for the fields and their matching sources."""
    import sympy as sp

    nd = problem.ndim
    xs = sp.symbols(f"x0:{nd}")
    t = sp.Symbol("t")
    ext = problem.extents
    decay = sp.exp(-t)
    pi = sp.pi

    bump = sp.Integer(1)
    for d in range(nd):
        bump = bump * sp.cos(pi * xs[d] / ext[d])
    n = problem.n_base + problem.n_amp * bump * decay
    c = (problem.c_base
         + problem.c_amp * sp.cos(pi * xs[0] / ext[0])
         * sp.cos(pi * xs[1] / ext[1]) * decay)

    a = problem.u_amp
    sx = sp.sin(pi * xs[0] / ext[0])
    sy = sp.sin(pi * xs[1] / ext[1])
    u0 = (a / ext[1]) * sx ** 2 * sp.sin(2 * pi * xs[1] / ext[1]) * decay
    u1 = -(a / ext[0]) * sp.sin(2 * pi * xs[0] / ext[0]) * sy ** 2 * decay
    if nd == 3:
        sz2 = sp.sin(pi * xs[2] / ext[2]) ** 2
        u0 = u0 * sz2
        u1 = u1 * sz2
        u = [u0, u1, sp.Integer(0)]
    else:
        u = [u0, u1]

    m = sp.Float(problem.m)
    eps = sp.Float(problem.epsilon)
    phi = sp.Float(problem.gravity) * xs[0]

    adv_n = sum(u[d] * sp.diff(n, xs[d]) for d in range(nd))
    diff_n = sum(
        sp.diff(m * (n + eps) ** (m - 1) * sp.diff(n, xs[d]), xs[d])
        for d in range(nd)
    )
    chem = sum(
        sp.diff(n / (1 + eps * n) ** 3 * sp.diff(c, xs[d]), xs[d])
        for d in range(nd)
    )
    s_n = sp.diff(n, t) + adv_n - diff_n + chem

    s_c = (sp.diff(c, t)
           + sum(u[d] * sp.diff(c, xs[d]) for d in range(nd))
           - sum(sp.diff(c, xs[d], 2) for d in range(nd))
           + c - n)

    s_u = []
    for k in range(nd):
        expr = (sp.diff(u[k], t)
                + sum(u[j] * sp.diff(u[k], xs[j]) for j in range(nd))
                - sum(sp.diff(u[k], xs[j], 2) for j in range(nd))
                - n * sp.diff(phi, xs[k]))
        s_u.append(expr)

    return xs, t, {"n": n, "c": c, "u": u, "sn": s_n, "sc": s_c, "su": s_u}


def _callables(problem):
    hit = _DERIVED.get(problem)
    if hit is not None:
        return hit
    import sympy as sp

    xs, t, ex = _expressions(problem)
    args = (*xs, t)

    def lam(expr):
        fn = sp.lambdify(args, expr, modules="numpy")

        def call(mesh, tv):
            out = fn(*mesh, tv)
            return np.ascontiguousarray(
                np.broadcast_to(np.asarray(out, dtype=float), mesh[0].shape)
            )

        return call

    made = {
        "n": lam(ex["n"]),
        "c": lam(ex["c"]),
        "u": [lam(e) for e in ex["u"]],
        "sn": lam(ex["sn"]),
        "sc": lam(ex["sc"]),
        "su": [lam(e) for e in ex["su"]],
    }
    _DERIVED[problem] = made
    return made


def exact_n(problem, grid, t):
    fn = _callables(problem)["n"]
    return ScalarField.from_interior(grid, fn(grid.cell_mesh(), t))


def exact_c(problem, grid, t):
    fn = _callables(problem)["c"]
    return ScalarField.from_interior(grid, fn(grid.cell_mesh(), t))


def exact_u(problem, grid, t):
    fns = _callables(problem)["u"]
    faces = [fns[k](grid.face_mesh(k), t) for k in range(grid.ndim)]
    return VectorField.from_face_arrays(grid, faces)


def sources(problem, grid):
    """Source callbacks keyed like TrajectoryRecord.sources.

    Values are memoized per time: the certificate suite revisits the
    same snapshot instants for every test function.
    """
    made = _callables(problem)
    cmesh = grid.cell_mesh()
    fmesh = [grid.face_mesh(k) for k in range(grid.ndim)]
    memo = {}

    def s_n(t):
        key = ("n", t)
        if key not in memo:
            memo[key] = made["sn"](cmesh, t)
        return memo[key]

    def s_c(t):
        key = ("c", t)
        if key not in memo:
            memo[key] = made["sc"](cmesh, t)
        return memo[key]

    def s_u(t):
        key = ("u", t)
        if key not in memo:
            memo[key] = [made["su"][k](fmesh[k], t)
                         for k in range(grid.ndim)]
        return memo[key]

    return {"n": s_n, "c": s_c, "u": s_u}


def _err_scalar(f, ref):
    d = f.interior - ref.interior
    return float(np.sqrt(np.sum(d * d) * f.grid.cell_volume))


def _err_vector(u, ref):
    g = u.grid
    acc = 0.0
    for k in range(g.ndim):
        d = u.face_values(k) - ref.face_values(k)
        acc += float(np.sum(d * d))
    return float(np.sqrt(acc * g.cell_volume))


def _steps_for(t_end, dt_target, multiple):
    blocks = max(1, int(np.ceil(t_end / (dt_target * multiple))))
    steps = blocks * multiple
    return steps, t_end / steps


def level_grid(problem, level, base=8):
    from .grid import Grid

    dims = tuple(base * 2 ** level for _ in range(problem.ndim))
    return Grid(dims, problem.extents)


def _march_decoupled(problem, grid, kind, *, dt_factor, t_end, snap_parts):
    made = sources(problem, grid)
    h = min(grid.spacing)
    steps, dt = _steps_for(t_end, dt_factor * h * h, snap_parts)
    if kind == "n":
        f = exact_n(problem, grid, 0.0)
        params = CellStepParams(problem.m, problem.epsilon, dt)
        for k in range(steps):
            t = k * dt
            p = replace(params, mms_source=made["n"](t))
            f = step_n(f, exact_c(problem, grid, t),
                       exact_u(problem, grid, t), p)
        return _err_scalar(f, exact_n(problem, grid, t_end))
    if kind == "c":
        f = exact_c(problem, grid, 0.0)
        for k in range(steps):
            t = k * dt
            f = step_c(f, exact_n(problem, grid, t),
                       exact_u(problem, grid, t), dt,
                       mms_source=made["c"](t),
                       c_prev_solution=f.interior)
        return _err_scalar(f, exact_c(problem, grid, t_end))
    if kind == "u":
        phi = linear_potential(grid, problem.gravity)
        u, p = project(exact_u(problem, grid, 0.0))
        params = FluidStepParams(0.0, dt, phi)
        for k in range(steps):
            t = k * dt
            u, p = step_u(u, exact_n(problem, grid, t), params,
                          mms_source=made["u"](t), p_init=p)
        return _err_vector(u, exact_u(problem, grid, t_end))
    raise DomainError(f"unknown decoupled study kind {kind!r}")


def _march_coupled(problem, grid, *, dt_factor, t_end, snap_parts,
                   proj_tol=1e-8, mass_rtol=1e-9):
    """Full system march with all three sources; returns the record.

    Online gates: exact mass budget (transport telescopes, the source
    adds its integral), nonnegativity of both scalars, and the projection
    tolerance on the divergence.  The energy gate does not apply here:
    the momentum source injects energy that the balance does not model.
    """
    made = sources(problem, grid)
    h = min(grid.spacing)
    steps, dt = _steps_for(t_end, dt_factor * h * h, snap_parts)
    snap_every = steps // snap_parts

    n = exact_n(problem, grid, 0.0)
    c = exact_c(problem, grid, 0.0)
    u, p = project(exact_u(problem, grid, 0.0))
    phi = linear_potential(grid, problem.gravity)
    pn = CellStepParams(problem.m, problem.epsilon, dt)
    pu = FluidStepParams(0.0, dt, phi, proj_tol=proj_tol)

    rec = TrajectoryRecord(grid, problem.m, problem.epsilon, phi)
    rec.append(0.0, n, c, u)
    expected_mass = integrate(n)
    vol = grid.cell_volume
    for k in range(steps):
        t = k * dt
        sn = made["n"](t)
        n = step_n(n, c, u, replace(pn, mms_source=sn))
        c = step_c(c, n, u, dt, mms_source=made["c"](t),
                   c_prev_solution=c.interior)
        u, p = step_u(u, n, pu, mms_source=made["u"](t), p_init=p)

        expected_mass += dt * float(np.sum(sn)) * vol
        mass = integrate(n)
        if abs(mass - expected_mass) > mass_rtol * max(1.0, abs(expected_mass)):
            raise InvariantViolation(
                f"mass budget broke at step {k}: {mass!r} vs {expected_mass!r}",
                step_index=k,
            )
        if float(np.min(c.interior)) < 0.0:
            raise InvariantViolation(
                f"signal lost nonnegativity at step {k}", step_index=k
            )
        if float(np.max(np.abs(div(u).interior))) > proj_tol:
            raise InvariantViolation(
                f"projection defect exceeded {proj_tol} at step {k}",
                step_index=k,
            )
        if (k + 1) % snap_every == 0:
            rec.append((k + 1) * dt, n, c, u)
    rec.sources = made
    return rec


def run_decoupled_study(problem, kinds=("n", "c", "u"), levels=(0, 1, 2), *,
                        base=8, dt_factor=0.05, t_end=0.125):
    """March each equation alone against frozen exact partners.

    Returns {kind: {"errors": [...], "orders": [...]}}.
    """
    out = {}
    for kind in kinds:
        errs = []
        for lev in levels:
            grid = level_grid(problem, lev, base)
            errs.append(_march_decoupled(
                problem, grid, kind,
                dt_factor=dt_factor, t_end=t_end, snap_parts=1))
        orders = [float(np.log2(errs[i] / errs[i + 1]))
                  for i in range(len(errs) - 1)]
        out[kind] = {"errors": errs, "orders": orders}
    return out


def run_coupled_study(problem, levels=(0, 1, 2), *, base=8, dt_factor=0.05,
                      t_end=0.125, snap_base=10):
    """March the full system on a refinement ladder.

    Snapshot spacing refines with the grid so the certificate integrals
    converge along with the fields.  Returns per-field errors and orders
    plus the trajectory records for residual studies.
    """
    errs = {"n": [], "c": [], "u": []}
    records = []
    for lev in levels:
        grid = level_grid(problem, lev, base)
        rec = _march_coupled(
            problem, grid, dt_factor=dt_factor, t_end=t_end,
            snap_parts=snap_base * 2 ** lev)
        records.append(rec)
        errs["n"].append(_err_scalar(rec.n[-1], exact_n(problem, grid, t_end)))
        errs["c"].append(_err_scalar(rec.c[-1], exact_c(problem, grid, t_end)))
        errs["u"].append(_err_vector(rec.u[-1], exact_u(problem, grid, t_end)))
    out = {}
    for key, es in errs.items():
        out[key] = {
            "errors": es,
            "orders": [float(np.log2(es[i] / es[i + 1]))
                       for i in range(len(es) - 1)],
        }
    return out, records


def decay_test_functions(ndim, t_cut):
    """Deterministic test functions matched to the manufactured flow.

    The scalar expansion mixes the low cosine harmonics the fields live
    on.  The solenoidal function uses power-2 node profiles: odd-power
    profiles carry only odd harmonics and pair with the sin^2-family
    flow to exact discrete zeros, which would turn a decay study into a
    roundoff measurement.
    """
    from .testfuncs import ScalarTestFunction, SolenoidalTestFunction

    if ndim == 2:
        coeffs = {(1, 1): 0.8, (0, 1): -0.5, (2, 0): 0.3}
        amps = (1.0,)
        waves = ((1, 1),)
    else:
        coeffs = {(1, 1, 0): 0.8, (0, 1, 1): -0.5, (2, 0, 1): 0.3}
        amps = (0.4, -0.7, 1.0)
        # wavenumber 2 along each potential's own axis: the flow's
        # sin^2 factors live on cosine harmonics {0, 2}, and a center
        # profile at q = 1 pairs with them to an exact discrete zero
        waves = ((2, 1, 1), (1, 2, 1), (1, 1, 2))
    scalar = ScalarTestFunction(coeffs=coeffs, t_cut=t_cut)
    sol = SolenoidalTestFunction(amplitudes=amps, wavenumbers=waves,
                                 t_cut=t_cut, power=2)
    return scalar, sol


def residual_decay(records, *, t_cut=None, include_n_weak=True):
    """Equality-identity residuals on a refinement ladder of records.

    Returns {identity: {"residuals": [...], "orders": [...]}} using the
    deterministic matched test functions; an orthogonality guard rejects
    pairings that would only measure roundoff.
    """
    from .fields import vf_dot, vf_norm_sq
    from .residuals import (
        residual_c_weak,
        residual_n_tested,
        residual_n_weak,
        residual_u_weak,
    )

    if t_cut is None:
        t_cut = 0.75 * records[0].times[-1]
    grid0 = records[0].grid
    scalar, sol = decay_test_functions(grid0.ndim, t_cut)

    u0 = records[0].u[0]
    psi = sol.spatial(grid0)
    overlap = abs(vf_dot(u0, psi))
    scale = float(np.sqrt(vf_norm_sq(u0) * vf_norm_sq(psi)))
    if overlap < 1e-6 * max(scale, 1e-300):
        raise DomainError(
            "solenoidal test function is orthogonal to the stored flow")

    evals = {
        "c_weak": lambda r: residual_c_weak(r, scalar),
        "u_weak": lambda r: residual_u_weak(r, sol),
        "n_tested": lambda r: residual_n_tested(r, scalar),
    }
    if include_n_weak:
        evals["n_weak"] = lambda r: residual_n_weak(r, scalar)
    out = {}
    for name, fn in evals.items():
        res = [abs(fn(r)) for r in records]
        orders = [float(np.log2(res[i] / res[i + 1]))
                  for i in range(len(res) - 1)]
        out[name] = {"residuals": res, "orders": orders}
    return out


def defect_envelope(record, *, seed=0, n_test=20, t_cut=None,
                    include_n_weak=None):
    """Largest certificate defects on one trajectory.

    Used to calibrate the one-sided tolerances: on a manufactured record
    the identities hold exactly in the limit, so the measured defects
    bound the quadrature and scheme error at that resolution.  The
    standard weak form joins the envelope above the regime floor; at
    fixed epsilon its defect includes the saturation model gap, which is
    what the tolerance has to cover on real trajectories.
    """
    from .residuals import (
        c2_inequality_check,
        n_weak_in_theory,
        residual_c_weak,
        residual_n_tested,
        residual_n_weak,
        residual_u_weak,
        supersolution_residual,
    )
    from .testfuncs import ScalarTestFunction, SolenoidalTestFunction

    rng = np.random.default_rng(seed)
    grid = record.grid
    if t_cut is None:
        t_cut = 0.75 * record.times[-1]
    if include_n_weak is None:
        include_n_weak = n_weak_in_theory(record.m)
    super_ok = 4.0 / 3.0 < record.m < 2.0
    worst = {"super": 0.0, "c2": 0.0, "weak": 0.0}
    for _ in range(n_test):
        tf = ScalarTestFunction.random(
            rng, ndim=grid.ndim, t_cut=t_cut, nonnegative=True)
        if super_ok:
            worst["super"] = max(worst["super"],
                                 abs(supersolution_residual(record, tf)))
        if include_n_weak:
            worst["weak"] = max(worst["weak"],
                                abs(residual_n_weak(record, tf)))
    for k in range(1, len(record.times)):
        worst["c2"] = max(worst["c2"],
                          abs(c2_inequality_check(record, record.times[k])))
    for _ in range(5):
        tf = ScalarTestFunction.random(rng, ndim=grid.ndim, t_cut=t_cut)
        worst["weak"] = max(worst["weak"], abs(residual_c_weak(record, tf)))
        worst["weak"] = max(worst["weak"],
                            abs(residual_n_tested(record, tf)))
        if include_n_weak:
            worst["weak"] = max(worst["weak"],
                                abs(residual_n_weak(record, tf)))
        psi = SolenoidalTestFunction.random(rng, ndim=grid.ndim, t_cut=t_cut)
        worst["weak"] = max(worst["weak"], abs(residual_u_weak(record, psi)))
    return worst
