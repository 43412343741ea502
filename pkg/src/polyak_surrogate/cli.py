"""Command line entry point: ``polyak-surrogate {run,certify,reproduce,list}``."""

from __future__ import annotations

import argparse
import json
import sys

from . import diagnostics as dg
from .counterexamples import REGION_KINDS
from .exceptions import ConfigurationError
from .harness import (
    EXPERIMENTS,
    OUTPUT_ENV,
    UsageError,
    _jsonable,
    execute,
    make_config,
    output_root,
    read_config_file,
    reproduce,
    write_margins,
)
from .problems import StochasticProblem, get_problem, problem_names
from .steppers import STEPPER_NAMES
from .surrogates import TRANSFORM_NAMES, build_family

EXIT_USAGE = 2
EXIT_FAIL = 1

RUN_EPILOG = """\
trajectory CSV columns: t, x0..x{d-1}, f, eta, h, clipped
  f        objective value (F for finite sums)
  eta      stepsize applied to h*g (to g for gd)
  h        sampled transformed value; H(x) on the final row
  clipped  1 if the gamma cap set the stepsize
floats use 17 significant digits. output root: --out, else $%s, else ./runs
""" % OUTPUT_ENV

PROPERTIES = ("lsuc", "approx_lsuc", "self_bounded", "lipschitz", "sharp", "qg", "qg_plus",
              "holder", "lsuc_qgplus")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyak-surrogate",
                                description="Polyak stepsizes as surrogate gradient descent")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a stepper and audit it", epilog=RUN_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("--config", help="key=value file; flags override it")
    r.add_argument("--problem")
    r.add_argument("--stepper")
    r.add_argument("--transform")
    r.add_argument("--x1", help="start point, comma or space separated")
    r.add_argument("--steps")
    r.add_argument("--seeds", help="e.g. 0..99 or 1,2,3")
    r.add_argument("--audit", dest="audits", help="e.g. one_step,rate:self_bounded:L=1")
    r.add_argument("--output-dir", dest="output_dir")
    r.add_argument("--out", help="output root")
    r.add_argument("--workers", type=int, default=4)

    c = sub.add_parser("certify", help="certify a function-class inequality on a grid")
    c.add_argument("--problem", required=True)
    c.add_argument("--property", required=True, choices=PROPERTIES)
    c.add_argument("--lambda", dest="lam", type=float)
    c.add_argument("--L", type=float)
    c.add_argument("--G", type=float)
    c.add_argument("--s", type=float)
    c.add_argument("--mu", type=float)
    c.add_argument("--L-nu", dest="L_nu", type=float)
    c.add_argument("--nu", type=float)
    c.add_argument("--transform", default="lower_bound:0",
                   help="h-transform for approx_lsuc (default: h = f)")
    c.add_argument("--grid", default="standard",
                   help="standard | 1d:lo:hi:step | ball:n:radius")
    c.add_argument("--out", help="output root for the margins CSV")

    rp = sub.add_parser("reproduce", help="run a pinned non-convergence reproduction")
    rp.add_argument("experiment", choices=sorted(EXPERIMENTS))
    rp.add_argument("--out", help="output root")

    ls = sub.add_parser("list", help="list problems, steppers, transforms, experiments")
    ls.add_argument("what", nargs="?", default="all",
                    choices=["all", "problems", "steppers", "transforms", "experiments",
                             "regimes", "regions"])
    return p


def _grid(oracle, text: str):
    if text == "standard":
        return None
    kind, *parts = text.split(":")
    try:
        if kind == "1d":
            lo, hi, step = map(float, parts)
            return dg.standard_grid(oracle, lo, hi, step)
        if kind == "ball":
            return dg.ball_grid(oracle, int(parts[0]), float(parts[1]))
    except (ValueError, IndexError) as exc:
        raise UsageError(f"grid: cannot parse {text!r}") from exc
    raise UsageError(f"grid: unknown kind {kind!r}")


def _need(args, *names):
    vals = []
    for n in names:
        v = getattr(args, n)
        if v is None:
            raise UsageError(f"--{n.replace('_', '-').replace('lam', 'lambda')} is required "
                             f"for property {args.property}")
        vals.append(v)
    return vals


def _certify(args) -> int:
    try:
        problem = get_problem(args.problem)
    except (LookupError, ValueError) as exc:
        raise UsageError(f"problem: {exc}") from exc
    f = problem.as_oracle() if isinstance(problem, StochasticProblem) else problem
    grid = _grid(f, args.grid)
    prop = args.property
    if prop == "lsuc":
        cert = dg.check_lsuc(f, *_need(args, "lam"), grid)
    elif prop == "approx_lsuc":
        fam = build_family(f, args.transform)
        cert = dg.check_approx_lsuc(fam.components[0], grid)
    elif prop == "self_bounded":
        cert = dg.check_self_bounded(f, *_need(args, "L"), grid)
    elif prop == "lipschitz":
        cert = dg.check_lipschitz(f, *_need(args, "G"), grid)
    elif prop == "sharp":
        cert = dg.check_sharp(f, *_need(args, "s"), grid)
    elif prop == "qg":
        cert = dg.check_qg(f, *_need(args, "mu"), grid)
    elif prop == "qg_plus":
        cert = dg.check_qg_plus(f, *_need(args, "L"), grid)
    elif prop == "holder":
        cert = dg.check_holder(f, *_need(args, "L_nu", "nu"), grid)
    else:
        rep = dg.check_lsuc_qgplus_equivalence(f, *_need(args, "L"), grid)
        payload = {"property": "lsuc_qgplus", "holds": rep.holds,
                   "worst_margin": rep.worst_margin, "qg_plus": rep.qg_plus.to_dict(),
                   "lsuc": rep.lsuc.to_dict(), "backward": rep.backward.to_dict()}
        print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
        return 0 if rep.holds else EXIT_FAIL
    path = write_margins(cert, f"{args.problem}_{prop}", output_root(args.out))
    print(json.dumps(_jsonable({**cert.to_dict(), "margins_csv": str(path)}),
                     indent=2, sort_keys=True))
    return 0 if cert.holds else EXIT_FAIL


def _run(args) -> int:
    values: dict = read_config_file(args.config) if args.config else {}
    for key in ("problem", "stepper", "transform", "x1", "steps", "seeds", "audits",
                "output_dir"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    cfg = make_config(values)
    manifest = execute(cfg, output_root(args.out), workers=args.workers)
    for v in manifest.verdicts:
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {v['audit']}")
    for k, v in sorted(manifest.summary.items()):
        print(f"{k}: {v}")
    print(f"manifest: {manifest.path}")
    return 0 if manifest.passed else EXIT_FAIL


def _list(what: str) -> int:
    groups = {
        "problems": problem_names(),
        "steppers": list(STEPPER_NAMES),
        "transforms": list(TRANSFORM_NAMES),
        "experiments": sorted(EXPERIMENTS),
        "regimes": list(dg.REGIMES),
        "regions": list(REGION_KINDS),
    }
    for name, items in groups.items():
        if what in ("all", name):
            print(f"{name}:")
            for item in items:
                print(f"  {item}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "certify":
            return _certify(args)
        if args.command == "reproduce":
            rep, out = reproduce(args.experiment, output_root(args.out))
            print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.name}: {rep.claim}")
            for k, v in rep.measured.items():
                print(f"  {k}: {v}")
            print(f"outputs: {out}")
            return 0 if rep.passed else EXIT_FAIL
        return _list(args.what)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
