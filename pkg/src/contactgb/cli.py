"""Command line entry point: `contactgb run <scenario>` and `contactgb density <scenario>`."""
from __future__ import annotations

import argparse
import os
import sys

from . import curvature_measures as cm
from .errors import ContactGBError, IoError, ParseError, StageDependencyError, ValidationError
from .scenario import STAGES, emit, load_scenario, run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _stage_list(text):
    stages = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown stage(s): {', '.join(bad)}")
    return stages


def build_parser():
    parser = argparse.ArgumentParser(prog="contactgb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write its reports")
    r.add_argument("scenario")
    r.add_argument("--out", default=None, help="output directory (default: scenario outputs.dir or ./out/<name>)")
    r.add_argument("--stages", type=_stage_list, default=None,
                   help="comma list from classify,converge,invariants (default: all that apply)")
    r.add_argument("--eps-override", type=_float_list, default=None, dest="eps_override")
    r.add_argument("--grid", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    d = sub.add_parser("density", help="write a gridded density CSV (u,v,density) for one chart")
    d.add_argument("scenario")
    d.add_argument("--kind", choices=cm.KINDS, default="K_eps_sigma_eps")
    d.add_argument("--eps", type=float, default=None)
    d.add_argument("--chart", type=int, default=0)
    d.add_argument("--n", type=int, default=101)
    d.add_argument("--out", required=True)
    return parser


def _fail(code, exc):
    stage = getattr(exc, "stage", None)
    tag = ""
    if stage:
        cid = getattr(exc, "chart_id", None)
        tag = f"[stage {stage}" + (f", chart {cid}" if cid is not None else "") + "] "
    print(f"error: {tag}{type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def _cmd_run(args):
    sc = load_scenario(args.scenario)
    if args.eps_override is not None:
        for e in args.eps_override:
            if not 0 < e <= 1:
                raise ValidationError("epsilon", "must be positive" if e <= 0 else "must not exceed 1")
        sc.epsilons = list(args.eps_override)
    if args.grid is not None:
        sc.options["grid"] = args.grid
    if args.seed is not None:
        sc.options["seed"] = args.seed
    out = args.out or sc.outputs.get("dir") or os.path.join("out", sc.name)
    report = run(sc, args.stages)
    files = emit(report, out, tuple(sc.outputs.get("formats", ("csv", "json"))))
    for f in files:
        print(f)
    for stage, secs in report.timing.items():
        print(f"{stage}: {secs:.2f} s", file=sys.stderr)
    failed = [c["name"] for c in report.invariants if not c["passed"]]
    if failed:
        print("invariant failures: " + ", ".join(failed), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_density(args):
    sc = load_scenario(args.scenario)
    if sc.fixture is not None:
        raise ValidationError("scenario", "density export needs a surface scenario")
    if not 0 <= args.chart < len(sc.charts):
        raise ValidationError("--chart", f"must be in 0..{len(sc.charts) - 1}")
    if args.kind in ("K_eps_sigma_eps", "difference") and (args.eps is None or args.eps <= 0):
        raise ValidationError("epsilon", "must be positive")
    rows = cm.density_grid(sc.charts[args.chart], sc.model, args.kind, args.eps, n=args.n)
    try:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("u,v,density\n")
            for u, v, d in rows:
                fh.write(f"{u:.17g},{v:.17g},{d:.17g}\n")
    except OSError as exc:
        raise IoError(args.out, exc.strerror or str(exc)) from exc
    print(args.out)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_density(args)
    except (ParseError, ValidationError, IoError, StageDependencyError) as exc:
        return _fail(EXIT_VALIDATION, exc)
    except ContactGBError as exc:
        return _fail(EXIT_NUMERICAL, exc)


if __name__ == "__main__":
    sys.exit(main())
