"""Print the convergence table of every test function in a surface scenario.

    python3 scripts/run_sweep.py scenarios/heisenberg_plane.scn --count 11
"""
import argparse

from contactgb import curvature_measures as cm
from contactgb.scenario import RunReport, load_scenario, stage_classify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    ap.add_argument("--count", type=int, default=None, help="use eps = 4^-j, j < count, instead of the file's list")
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    rep = RunReport(sc.name, sc.digest, "", ["classify"])
    points = stage_classify(sc, rep)
    sweep = cm.default_sweep(args.count) if args.count else sc.epsilons
    spec = cm.QuadSpec(**sc.options["quadrature"])
    for ph in sc.phis:
        print(f"# phi = {ph.source}")
        print(f"{'eps':>12} {'integral':>16} {'target':>12} {'abs_error':>10} {'quad_error':>10}")
        for r in cm.convergence_table(sc.charts, sc.model, points, ph.function, sweep, spec):
            print(f"{r.epsilon:12.4e} {r.integral:16.10f} {r.target:12.8f} {r.abs_error:10.2e} {r.quad_error:10.2e}")


if __name__ == "__main__":
    main()
