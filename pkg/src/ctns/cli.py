"""Command-line front end.

Subcommands: run (march + gate + certify), sweep (epsilon ladder), mms
(manufactured-solution verification), compare (two-regime certification),
certify (re-run the certificate suite on a stored trajectory).

Exit codes: 0 all enabled assertions passed; 2 invariant or configuration
violation; 3 linear solver failure.
"""

import argparse
import os
import sys
from dataclasses import replace

from .config import read_config, reference_config
from .errors import (
    CflViolation,
    ConfigError,
    DomainError,
    InvariantViolation,
    LinearSolveFailure,
    NegativeDensity,
)


def _load_config(args):
    cfg = read_config(args.config) if args.config else reference_config()
    if args.out:
        cfg = replace(cfg, outdir=args.out)
    return cfg


def _write_report(outdir, name, text):
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, name), "w") as fh:
            fh.write(text)


def _certify_lines(traj, cfg, seed, t_cut):
    from .residuals import certify, render_report

    lines = certify(traj, seed=seed, tol_super=cfg.tol_super,
                    tol_weak=cfg.tol_weak, t_cut=t_cut)
    return lines, render_report(
        lines, header=f"certificates: m = {traj.m!r}, eps = {traj.epsilon!r}")


def _cmd_run(args):
    from .run import run_single

    cfg = _load_config(args)
    traj, ledger = run_single(cfg, outdir=cfg.outdir,
                              force_cfl=args.force_cfl)
    print(f"completed {len(ledger.times) - 1} steps to "
          f"t = {ledger.times[-1]!r}")
    print(f"mass drift {ledger.max_rel_mass_drift()!r}, "
          f"min g {ledger.min_g()!r}")
    lines, text = _certify_lines(traj, cfg, args.seed, cfg.t_cut)
    print(text, end="")
    _write_report(cfg.outdir, "certificate.txt", text)
    return 0 if all(line.passed for line in lines) else 2


def _cmd_sweep(args):
    from .run import run_epsilon_sweep

    cfg = _load_config(args)
    epsilons = [float(x) for x in args.epsilons.split(",")]
    rep = run_epsilon_sweep(cfg, epsilons, force_cfl=args.force_cfl)
    text = rep.render()
    print(text, end="")
    _write_report(cfg.outdir, "sweep_report.txt", text)
    return 0 if rep.passed else 2


def _cmd_mms(args):
    from .run import run_mms

    cfg = _load_config(args)
    rep = run_mms(cfg, levels=args.levels)
    text = rep.render()
    print(text, end="")
    _write_report(cfg.outdir, "mms_report.txt", text)
    return 0 if rep.passed else 2


def _cmd_compare(args):
    from .run import run_regime_compare

    cfg = _load_config(args)
    rep = run_regime_compare(cfg, seed=args.seed,
                             force_cfl=args.force_cfl)
    text = rep.render()
    print(text, end="")
    _write_report(cfg.outdir, "compare_report.txt", text)
    return 0 if rep.passed else 2


def _cmd_certify(args):
    from .trajectory import TrajectoryRecord

    cfg = _load_config(args)
    traj = TrajectoryRecord.load(args.trajectory)
    t_cut = cfg.t_cut if args.config else None
    lines, text = _certify_lines(traj, cfg, args.seed, t_cut)
    print(text, end="")
    _write_report(args.out, "certificate.txt", text)
    return 0 if all(line.passed for line in lines) else 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="INI configuration file")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, default=0, metavar="N",
                        help="seed for the certificate test functions")
    common.add_argument("--force-cfl", action="store_true",
                        help="march through Courant violations")

    p = argparse.ArgumentParser(
        prog="ctns",
        description="chemotaxis-fluid simulator and identity certifier")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("run", parents=[common],
                       help="single gated run plus certificates")
    q.set_defaults(func=_cmd_run)

    q = sub.add_parser("sweep", parents=[common],
                       help="epsilon ladder with stabilization check")
    q.add_argument("--epsilons", default="0.1,0.03,0.01",
                   help="comma list, non-increasing")
    q.set_defaults(func=_cmd_sweep)

    q = sub.add_parser("mms", parents=[common],
                       help="manufactured-solution convergence study")
    q.add_argument("--levels", type=int, default=3)
    q.set_defaults(func=_cmd_mms)

    q = sub.add_parser("compare", parents=[common],
                       help="certify the two solution regimes")
    q.set_defaults(func=_cmd_compare)

    q = sub.add_parser("certify", parents=[common],
                       help="re-run the certificate suite on a stored "
                            "trajectory")
    q.add_argument("trajectory", metavar="DIR",
                   help="directory written by a previous run")
    q.set_defaults(func=_cmd_certify)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except LinearSolveFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (InvariantViolation, CflViolation, NegativeDensity) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
