"""Command line entry point.

Exit codes: 0 success, 2 configuration or geometry error, 3 search failure
(the shooting search did not produce admissible data), 4 run failure.
"""

import argparse
import dataclasses
import json
import os
import sys

from heatblowup.config import ExperimentConfig, parse_config
from heatblowup.errors import BlowupError, ConfigError, GeometryError, SolverError
from heatblowup import experiments as ex

EXIT_OK, EXIT_CONFIG, EXIT_CONSTRUCT, EXIT_SOLVER = 0, 2, 3, 4


def _load(args):
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if args.out:
        cfg = dataclasses.replace(cfg, out=args.out)
    cfg.validate()
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "effective_config.txt"), "w") as fh:
        fh.write(cfg.to_text())
    return cfg


def _target(setup, args, out):
    """Constructed target: read from out/construct/target.csv or rebuilt."""
    path = os.path.join(out, "construct", "target.csv")
    if getattr(args, "no_construct", False):
        if not os.path.exists(path):
            raise ConfigError(f"--no-construct given but {path} does not exist; "
                              "run `heatblowup construct` first")
        return ex.read_field(path, setup.grid), None
    res = ex.construct(setup)
    ex.save_construct(res, setup, os.path.join(out, "construct"))
    if not res.ok:
        raise _ConstructFailure(res.shooting.failure)
    return res.target, res


class _ConstructFailure(Exception):
    pass


def cmd_construct(args):
    cfg = _load(args)
    setup = ex.build_setup(cfg)
    res = ex.construct(setup)
    summary = ex.save_construct(res, setup, os.path.join(cfg.out, "construct"))
    print(f"d* = ({summary['d0_star']:.6g}, {summary['d1_star']:.6g}), "
          f"exit {summary['exit_mode']} at s = {summary['s_exit']:.4g}, "
          f"T_hat = {summary['T_hat']:.8g}, a_hat = {summary['a_hat']:.6g}")
    for w in res.warnings:
        print(f"warning: {w}")
    if not res.ok:
        print(f"construction failed: {res.shooting.failure}", file=sys.stderr)
        return EXIT_CONSTRUCT
    return EXIT_OK


def cmd_riccati(args):
    cfg = _load(args)
    setup = ex.build_setup(cfg)
    cache = args.cache or os.path.join(cfg.out, "riccati.npz")
    sol = ex.riccati_solution(setup, cache)
    print(f"Lyapunov solution on [0, {sol.horizon:.6g}] with {len(sol.knots)} knots, "
          f"form {sol.form}, cached at {cache}")
    return EXIT_OK


def cmd_control(args):
    cfg = _load(args)
    setup = ex.build_setup(cfg)
    target, _ = _target(setup, args, cfg.out)
    sol = ex.riccati_solution(setup, args.cache)
    y0 = ex.initial_state(setup, target)
    res, plan = ex.run_control(setup, target, sol, y0)
    summary = ex.save_run(res, setup, os.path.join(cfg.out, "control"), plan)
    if res.failed:
        print(f"run failed: {res.message}", file=sys.stderr)
        return EXIT_SOLVER
    if not summary.get("blowup_detected"):
        print("no blowup detected", file=sys.stderr)
        return EXIT_SOLVER
    print(f"T* = {summary['T_star']:.8g} (target {cfg.T}), a* = {summary['a_star']:.6g} "
          f"(target {cfg.a}), kappa_hat = {summary['kappa_hat']:.4g}, "
          f"regular region ok: {summary['regular_region_ok']}")
    return EXIT_OK


def cmd_stability(args):
    cfg = _load(args)
    setup = ex.build_setup(cfg)
    target, cres = _target(setup, args, cfg.out)
    sizes = args.sizes if args.sizes is not None else cfg.stability_sizes
    kw = {}
    if cres is not None:
        kw = {"T_hat": cres.T_hat, "a_hat": cres.a_hat}
    rep = ex.stability(setup, target, sizes, **kw)
    rep.shifts = ex.recenter_shifts(setup, target, cfg.recenter_sizes)
    summary = ex.save_stability(rep, setup, os.path.join(cfg.out, "stability"))
    for r in rep.rows:
        print(f"size {r['size']:.3g}: converged {r['converged']}, "
              f"|dT| = {r['dT']:.3g}, |da| = {r['da']:.3g}")
    print(f"deltas monotone: {summary['deltas_monotone']}")
    return EXIT_OK if all(r["converged"] for r in rep.rows) else EXIT_SOLVER


def cmd_diagnose(args):
    cfg = _load(args)
    setup = ex.build_setup(cfg)
    summary = ex.diagnose(setup, os.path.join(cfg.out, "control"))
    print(json.dumps(ex._jsonable({k: summary[k] for k in summary if k != "provenance"}),
                     indent=2, sort_keys=True))
    return EXIT_OK if summary.get("blowup_detected") else EXIT_SOLVER


def _sizes(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser():
    ap = argparse.ArgumentParser(prog="heatblowup",
                                 description="Controlled blowup experiments for the 1D heat equation")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory (overrides the config)")
        return p

    common(sub.add_parser("construct", help="shooting search for the auxiliary data"))
    p = common(sub.add_parser("riccati", help="solve and cache the Lyapunov equation"))
    p.add_argument("--cache", help="cache file (.npz)")
    p = common(sub.add_parser("control", help="three-phase controlled run"))
    p.add_argument("--no-construct", action="store_true",
                   help="reuse out/construct/target.csv")
    p.add_argument("--cache", help="Lyapunov cache file (.npz)")
    p = common(sub.add_parser("stability", help="perturbation and recentering study"))
    p.add_argument("--no-construct", action="store_true",
                   help="reuse out/construct/target.csv")
    p.add_argument("--sizes", type=_sizes, help="comma-separated relative perturbation sizes")
    common(sub.add_parser("diagnose", help="recompute diagnostics of a stored run"))
    return ap


COMMANDS = {"construct": cmd_construct, "riccati": cmd_riccati, "control": cmd_control,
            "stability": cmd_stability, "diagnose": cmd_diagnose}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _ConstructFailure as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCT
    except (SolverError, BlowupError, FloatingPointError, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, OSError) else EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
