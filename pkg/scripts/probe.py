"""Cumulative integral of 1/|X| around the characteristic points of a scenario.

    python3 scripts/probe.py scenarios/normal_form_k5.scn
"""
import argparse

import numpy as np

from contactgb import curvature_measures as cm
from contactgb.char_points import ChartField, PlanarField
from contactgb.scenario import RunReport, load_scenario, stage_classify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenario")
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    rep = RunReport(sc.name, sc.digest, "", ["classify"])
    for p in stage_classify(sc, rep):
        if sc.fixture is not None:
            fld = PlanarField(*sc.fixture.field, domain=sc.fixture.domain, variables=sc.fixture.variables)
        else:
            fld = ChartField(sc.charts[p.chart_id], sc.model, p.chart_id)
        res = cm.inv_norm_integrability_probe(fld, np.array(p.uv))
        print(f"# chart {p.chart_id} point {tuple(round(c, 12) for c in p.uv)} order {p.order}")
        print(f"{'radius':>12} {'annulus':>12} {'cumulative':>12}")
        for r, a, c in zip(res.radii[1:], res.annuli, res.cumulative):
            print(f"{r:12.4e} {a:12.4e} {c:12.6e}")
        print(f"tail {res.tail:.3e}  ratio {res.ratio:.3f}")


if __name__ == "__main__":
    main()
