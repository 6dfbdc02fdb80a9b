"""Scenario files, the staged runner and deterministic report output.

A scenario is a JSON tree.  Surface scenarios carry `manifold` and
`surface` blocks; pure-fixture scenarios carry a `fixture` block with a
planar vector field and are used for the characteristic-point oracles.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import char_points as cp
from . import curvature_measures as cm
from . import jets
from .contact_core import builtin_model, check_invariants, make_model, normalize
from .errors import (ContactGBError, IoError, ParseError, StageDependencyError,
                     UnknownIdentifier, ValidationError, ExprSyntaxError, NonSmoothPrimitive)
from .expr_engine import parse
from .surface_geometry import CHART_VARS, SurfaceJets, domain_from_json, make_chart

STAGES = ("classify", "converge", "invariants")

DEFAULT_OPTIONS = {
    "grid": 64,
    "newton_tol": 1e-9,
    "kmax": 7,
    "seed": 0,
    "samples_per_chart": 2500,
    "structure_samples": 40,
    "gauss_bonnet_eps": [1.0, 0.25, 0.0625, 0.015625],
    "structure_eps": [1.0, 0.25, 0.0625],
    "probe_tol": 1e-3,
    "quadrature": {},
    "tolerances": {
        "div_norm": 1e-8,
        "structure": 1e-6,
        "structure_min_norm": 0.2,
        "trace": 1e-6,
        "gauss_bonnet": 1e-3,
        "mu_total": 1e-4,
        "order_relative": 1e-4,
        "bridge_relative": 1e-3,
        "domination_growth": 1.1,
    },
}


# ---------------------------------------------------------------- data

@dataclass
class TestFunctionSpec:
    source: str
    function: cm.TestFunction

    __test__ = False


@dataclass
class FixtureSpec:
    field: tuple
    variables: tuple
    domain: object
    planted_k: int | None = None
    planted_mu: float | None = None
    curve: tuple | None = None


@dataclass
class Scenario:
    name: str
    digest: str
    model: object = None
    charts: list = field(default_factory=list)
    compact: bool = False
    epsilons: list = field(default_factory=list)
    phis: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    fixture: FixtureSpec | None = None


@dataclass
class RunReport:
    scenario: str
    digest: str
    version: str
    stages: list
    points: list = field(default_factory=list)
    euler: dict | None = None
    convergence: list = field(default_factory=list)
    mu_limit: list = field(default_factory=list)
    invariants: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c["passed"] for c in self.invariants)


# ---------------------------------------------------------------- loading

def _require(tree, key, path):
    if not isinstance(tree, dict) or key not in tree:
        raise ValidationError(f"{path}.{key}" if path else key, "required")
    return tree[key]


def _expr(source, variables, path):
    if not isinstance(source, str):
        raise ValidationError(path, "must be an expression string")
    try:
        return parse(source, variables)
    except UnknownIdentifier as exc:
        raise ValidationError(path, f"uses an undeclared identifier ({exc})") from exc
    except (ExprSyntaxError, NonSmoothPrimitive) as exc:
        raise ValidationError(path, f"is not a valid expression ({exc})") from exc


def _triple(tree, key, variables, path):
    val = _require(tree, key, path)
    if not isinstance(val, list) or len(val) != 3:
        raise ValidationError(f"{path}.{key}", "must list three expressions")
    return [_expr(s, variables, f"{path}.{key}[{i}]") for i, s in enumerate(val)]


def _domain(tree, path):
    try:
        return domain_from_json(tree)
    except (ValueError, TypeError) as exc:
        raise ValidationError(path, f"is not a domain ({exc})") from exc


def _epsilons(raw):
    if isinstance(raw, dict):
        g = raw.get("geometric")
        if not isinstance(g, dict):
            raise ValidationError("epsilons", "needs a list or a geometric block")
        eps = [float(g.get("start", 1.0)) * float(g.get("ratio", 0.25)) ** j for j in range(int(g.get("count", 9)))]
    elif isinstance(raw, list):
        eps = [float(e) for e in raw]
    else:
        raise ValidationError("epsilons", "needs a list or a geometric block")
    if not eps:
        raise ValidationError("epsilons", "must not be empty")
    for e in eps:
        if not e > 0:
            raise ValidationError("epsilon", "must be positive")
        if e > 1:
            raise ValidationError("epsilon", "must not exceed 1")
    return eps


def _options(raw):
    opts = json.loads(json.dumps(DEFAULT_OPTIONS))
    for key, val in (raw or {}).items():
        if key not in opts:
            raise ValidationError(f"options.{key}", "is not a known option")
        if isinstance(opts[key], dict):
            if not isinstance(val, dict):
                raise ValidationError(f"options.{key}", "must be an object")
            if key == "tolerances":
                for k in val:
                    if k not in opts[key]:
                        raise ValidationError(f"options.tolerances.{k}", "is not a known tolerance")
            opts[key].update(val)
        else:
            opts[key] = val
    quad_fields = set(cm.QuadSpec.__dataclass_fields__)
    for k in opts["quadrature"]:
        if k not in quad_fields:
            raise ValidationError(f"options.quadrature.{k}", "is not a quadrature setting")
    return opts


def scenario_from_tree(tree, name="scenario", digest="") -> Scenario:
    if not isinstance(tree, dict):
        raise ValidationError("scenario", "must be an object")
    name = tree.get("name", name)
    opts = _options(tree.get("options"))
    outputs = tree.get("outputs", {}) or {}
    if "fixture" in tree:
        fx = tree["fixture"]
        variables = tuple(fx.get("variables", ["x", "y"]))
        comps = _require(fx, "field", "fixture")
        if not isinstance(comps, list) or len(comps) != 2:
            raise ValidationError("fixture.field", "must list two expressions")
        fld = tuple(_expr(s, variables, f"fixture.field[{i}]") for i, s in enumerate(comps))
        dom = _domain(fx.get("domain", {"box": [-1, 1, -1, 1]}), "fixture.domain")
        planted = fx.get("planted", {})
        curve = fx.get("curve")
        if curve is not None:
            curve = tuple(_expr(s, ("t",), f"fixture.curve[{i}]") for i, s in enumerate(curve))
        spec = FixtureSpec(fld, variables, dom, planted.get("k"), planted.get("mu"), curve)
        return Scenario(name, digest, options=opts, outputs=outputs, fixture=spec,
                        epsilons=_epsilons(tree["epsilons"]) if "epsilons" in tree else [])
    man = _require(tree, "manifold", "")
    try:
        if isinstance(man, str):
            model = builtin_model(man)
        else:
            omega = _triple(man, "omega", ("x", "y", "z"), "manifold")
            f1 = _triple(man, "f1", ("x", "y", "z"), "manifold")
            f2 = _triple(man, "f2", ("x", "y", "z"), "manifold")
            model = normalize(make_model(omega, f1, f2, domain=man.get("domain")), seed=int(opts["seed"]))
    except ValidationError:
        raise
    except ContactGBError as exc:
        raise ValidationError("manifold", f"is not a valid contact model ({exc})") from exc
    surf = _require(tree, "surface", "")
    raw_charts = _require(surf, "charts", "surface")
    if not isinstance(raw_charts, list) or not raw_charts:
        raise ValidationError("surface.charts", "must be a non-empty list")
    charts = []
    for i, ch in enumerate(raw_charts):
        path = f"surface.charts[{i}]"
        imm = _triple(ch, "immersion", CHART_VARS, path)
        dom = _domain(_require(ch, "domain", path), f"{path}.domain")
        weight = _expr(ch["weight"], CHART_VARS, f"{path}.weight") if "weight" in ch else None
        orient = int(ch.get("orientation", 1))
        if orient not in (1, -1):
            raise ValidationError(f"{path}.orientation", "must be +1 or -1")
        charts.append(make_chart(imm, dom, orient, weight, tuple(ch.get("periodic", (False, False))),
                                 ch.get("name", f"chart{i}")))
    phis = []
    for i, ph in enumerate(tree.get("phis", [])):
        path = f"phis[{i}]"
        ambient = bool(ph.get("ambient", False))
        src = _require(ph, "expr", path)
        expr = _expr(src, ("x", "y", "z") if ambient else CHART_VARS, f"{path}.expr")
        support = _domain(ph["support"], f"{path}.support") if "support" in ph else None
        phis.append(TestFunctionSpec(src, cm.TestFunction(expr, ambient, support)))
    eps = _epsilons(_require(tree, "epsilons", ""))
    return Scenario(name, digest, model, charts, bool(surf.get("compact", False)), eps, phis, opts, outputs)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValidationError(str(path), f"cannot be read ({exc.strerror})") from exc
    try:
        tree = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    except UnicodeDecodeError as exc:
        raise ParseError("file is not UTF-8", 1, exc.start + 1) from exc
    digest = hashlib.sha256(raw + __version__.encode()).hexdigest()
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_tree(tree, stem, digest)


# ---------------------------------------------------------------- running

def _tagged(stage, chart_id=None):
    class _Tag:
        def __enter__(self):
            return self

        def __exit__(self, kind, exc, tb):
            if isinstance(exc, ContactGBError) and not hasattr(exc, "stage"):
                exc.stage = stage
                exc.chart_id = chart_id
            return False
    return _Tag()


def _check(name, observed, tolerance, passed, **extra):
    row = {"name": name, "passed": bool(passed), "observed": observed, "tolerance": tolerance}
    row.update(extra)
    return row


def _fixture_field(sc):
    fx = sc.fixture
    return cp.PlanarField(fx.field[0], fx.field[1], fx.domain, fx.variables)


def _fields(sc):
    if sc.fixture is not None:
        return [_fixture_field(sc)]
    return [cp.ChartField(ch, sc.model, i) for i, ch in enumerate(sc.charts)]


def _dedupe(points, fields):
    """Drop copies of the same ambient point seen from several charts, keeping the most interior."""
    keep = []
    for p in sorted(points, key=lambda p: -float(fields[p.chart_id].domain.distance_to_boundary(*p.uv))):
        if all(np.linalg.norm(np.subtract(p.xyz, k.xyz)) > 1e-6 for k in keep):
            keep.append(p)
    return sorted(keep, key=lambda p: (p.chart_id, p.uv))


def stage_classify(sc, report):
    opts = sc.options
    fields = _fields(sc)
    points = []
    for fld in fields:
        with _tagged("classify", fld.chart_id):
            found = cp.locate_characteristic_points(fld, grid=int(opts["grid"]), tol=float(opts["newton_tol"]))
            points.extend(cp.classify(fld, p, kmax=int(opts["kmax"])) for p in found)
    points = _dedupe(points, fields)
    report.points = points
    with _tagged("classify"):
        if sc.fixture is None and sc.compact:
            chi_idx, chi_formula = cp.euler_characteristic(points)
            report.euler = {"chi_from_indices": chi_idx, "chi_from_formula": chi_formula, "compact": True}
        else:
            report.euler = {
                "chi_from_indices": None,
                "chi_from_formula": sum(int(np.sign(p.trace * p.lambda_k)) for p in points if p.order % 2),
                "index_sum": sum(p.winding_index for p in points),
                "compact": False,
            }
    return points


def _quad_spec(sc):
    return cm.QuadSpec(**sc.options["quadrature"])


def stage_converge(sc, report):
    if sc.fixture is not None:
        raise StageDependencyError("converge needs a surface scenario; fixtures only support classify and invariants")
    if not sc.phis:
        raise ValidationError("phis", "at least one test function is required for convergence runs")
    spec = _quad_spec(sc)
    for i, ph in enumerate(sc.phis):
        with _tagged("converge"):
            integ = cm.Integrator(sc.charts, sc.model, report.points, ph.function, spec)
            rows = cm.convergence_table(sc.charts, sc.model, report.points, ph.function, sc.epsilons,
                                        integrator=integ)
            mu = cm.mu_limit_check(sc.charts, sc.model, report.points, ph.function, sc.epsilons,
                                   integrator=integ)
        report.convergence.append({"phi": ph.source, "rows": rows})
        report.mu_limit.append({"phi": ph.source, "max_deviation": mu.max_deviation,
                                "deviations": mu.deviations, "mu_direct": mu.mu_direct,
                                "mu_direct_error": mu.mu_direct_error, "mu_extrapolated": mu.mu_extrapolated})


def _surface_samples(sc, chart, n, rng):
    u0, u1, v0, v1 = chart.domain.bbox()
    u = rng.uniform(u0, u1, 4 * n)
    v = rng.uniform(v0, v1, 4 * n)
    ok = chart.domain.contains(u, v)
    return u[ok][:n], v[ok][:n]


def _surface_invariants(sc, report):
    opts = sc.options
    tol = opts["tolerances"]
    rng = np.random.default_rng(int(opts["seed"]))
    checks = []
    inv = check_invariants(sc.model, seed=int(opts["seed"]))
    checks.append(_check("model_invariants", max(inv["horizontal_f1"], inv["horizontal_f2"], inv["normalization"]),
                         1e-10, inv["ok"]))
    worst_div = 0.0
    worst_b = 0.0
    worst_struct = 0.0
    worst_coframe = 0.0
    dominations = []
    for cid, chart in enumerate(sc.charts):
        with _tagged("invariants", cid):
            u, v = _surface_samples(sc, chart, int(opts["samples_per_chart"]), rng)
            sj = SurfaceJets(chart, sc.model, u, v, order=0)
            worst_div = max(worst_div, float(np.max(np.abs(sj.div.value ** 2 + sj.norm2.value - 1.0))))
            for eps in sc.epsilons:
                b = cm.b_eps(np.clip(sj.div.value, -1, 1), eps)
                low = np.sqrt(eps) - b
                high = b - 1.0
                gap = np.abs(b - np.sqrt(np.maximum(sj.norm2.value, 0.0))) - np.sqrt(eps)
                worst_b = max(worst_b, float(np.max(np.concatenate([low, high, gap]))))
            far = np.sqrt(sj.norm2.value) > tol["structure_min_norm"]
            us, vs = u[far][: int(opts["structure_samples"])], v[far][: int(opts["structure_samples"])]
            for a, b_ in zip(us, vs):
                for eps in opts["structure_eps"]:
                    fs = cm.connection_form_eps(chart, sc.model, eps, (a, b_))
                    ks = jets.scalar(cm.k_sigma_density(cm._single_jets(chart, sc.model, (a, b_)), eps))
                    worst_struct = max(worst_struct, abs(fs.d_eta - ks) / max(1.0, abs(ks)))
                sj1 = SurfaceJets(chart, sc.model, np.array([a]), np.array([b_]), order=0)
                fr = cm.FrameJets(SurfaceJets(chart, sc.model, np.array([a]), np.array([b_]), order=1))
                nx = float(np.sqrt(sj1.norm2.value[0]))
                theta2 = np.array([float(t.value[0]) for t in fr.theta2])
                restricted = np.array([sj1.a.value[0], sj1.b.value[0]]) / nx
                worst_coframe = max(worst_coframe, float(np.max(np.abs(theta2 - restricted))))
            own = [p for p in report.points if p.chart_id == cid]
            coarse = cm.domination_constants(chart, sc.model, sc.epsilons, own, n=41)
            fine = cm.domination_constants(chart, sc.model, sc.epsilons, own, n=81)
            dominations.append((coarse, fine))
    checks.append(_check("div_squared_plus_norm_squared", worst_div, tol["div_norm"], worst_div < tol["div_norm"]))
    checks.append(_check("b_eps_bounds", worst_b, 1e-12, worst_b <= 1e-12))
    checks.append(_check("structure_equation", worst_struct, tol["structure"], worst_struct < tol["structure"]))
    checks.append(_check("coframe_theta2", worst_coframe, 1e-8, worst_coframe < 1e-8))
    for cid, (coarse, fine) in enumerate(dominations):
        grow = max(f / c if c > 0 else 1.0 for c, f in zip(coarse, fine))
        checks.append(_check("domination_constant", {"epsilon": sc.epsilons, "coarse": coarse, "fine": fine},
                             tol["domination_growth"], grow <= tol["domination_growth"], chart=cid))
    if report.points:
        tr = max(abs(abs(p.trace) - 1.0) for p in report.points)
        checks.append(_check("trace_normalization", tr, tol["trace"], tr <= tol["trace"]))
    checks.extend(_point_invariants(sc, report, _fields(sc)))
    if sc.compact:
        spec = _quad_spec(sc)
        with _tagged("invariants"):
            integ = cm.Integrator(sc.charts, sc.model, report.points, None, spec)
            for eps in opts["gauss_bonnet_eps"]:
                res = integ.integrate("K_eps_sigma_eps", eps)
                chi = report.euler["chi_from_indices"] if report.euler else 2
                err = abs(res.value - 2 * np.pi * chi)
                checks.append(_check("gauss_bonnet", err, tol["gauss_bonnet"], err < tol["gauss_bonnet"],
                                     epsilon=eps, integral=res.value, quad_error=res.error))
            mu = integ.integrate("mu_minus_one")
            checks.append(_check("total_mu_minus_one", abs(mu.value), tol["mu_total"], abs(mu.value) < tol["mu_total"],
                                 integral=mu.value, quad_error=mu.error))
    return checks


def _point_invariants(sc, report, fields):
    opts = sc.options
    tol = opts["tolerances"]
    checks = []
    for p in report.points:
        fld = fields[p.chart_id]
        tag = {"chart": p.chart_id, "u": p.uv[0], "v": p.uv[1]}
        with _tagged("invariants", p.chart_id):
            checks.append(_check("index_agreement", {"formula": p.index_formula, "winding": p.winding_index}, 0,
                                 p.index_formula == p.winding_index, **tag))
            r = 0.5 * p.isolation_radius
            w_half = cp.winding_index(fld, np.array(p.uv), 0.5 * r)
            checks.append(_check("winding_homotopy", {"radius": p.winding_index, "half_radius": w_half}, 0,
                                 w_half == p.winding_index, **tag))
            if p.order == 1:
                dev = abs(p.lambda_k - p.det / p.trace)
                checks.append(_check("lambda_one_identity", dev, 1e-8, dev < 1e-8, **tag))
            elif p.order % 2 == 1:
                res = cp.order_and_lambda(fld, np.array(p.uv), kmax=int(opts["kmax"]), r_max=r)
                bridge = res.derivative_of(res.hat_k1, p.order - 1)
                rel = abs(bridge - p.trace * p.lambda_k) / abs(p.trace * p.lambda_k)
                checks.append(_check("hat_K_bridge", rel, tol["bridge_relative"], rel < tol["bridge_relative"], **tag))
            probe = cm.inv_norm_integrability_probe(fld, np.array(p.uv))
            checks.append(_check("inv_norm_integrable", probe.tail, opts["probe_tol"],
                                 probe.tail < opts["probe_tol"], **tag))
    return checks


def _fixture_invariants(sc, report):
    fx = sc.fixture
    tol = sc.options["tolerances"]
    fld = _fixture_field(sc)
    checks = []
    if fx.planted_k is not None:
        near = [p for p in report.points if np.hypot(*p.uv) < 1e-6]
        ok = len(near) == 1
        k_obs = near[0].order if ok else None
        lam = near[0].lambda_k if ok else None
        checks.append(_check("planted_order", k_obs, 0, ok and k_obs == fx.planted_k, planted=fx.planted_k))
        if fx.planted_mu is not None and ok:
            target = abs(fx.planted_mu) if k_obs % 2 == 0 else fx.planted_mu
            rel = abs(lam - target) / abs(target)
            checks.append(_check("planted_lambda", rel, tol["order_relative"], rel < tol["order_relative"],
                                 planted=fx.planted_mu, observed_lambda=lam))
    if fx.curve is not None and fx.planted_k is not None:
        with _tagged("invariants"):
            der = cp.lambda_gamma_fixture(fld, fx.curve, fx.planted_k)
        lower = max(abs(d) for d in der[:-1]) if len(der) > 1 else 0.0
        ok = lower < 1e-9 and (fx.planted_mu is None or abs(der[-1] - fx.planted_mu) < 1e-9 * max(1, abs(fx.planted_mu)))
        checks.append(_check("kernel_extension_derivatives", der, 1e-9, ok))
    checks.extend(_point_invariants(sc, report, [fld]))
    return checks


def stage_invariants(sc, report):
    source = report
    if "classify" not in report.stages:
        # point checks still need the points; they stay out of this report
        source = RunReport(sc.name, sc.digest, __version__, ["classify"])
        stage_classify(sc, source)
    if sc.fixture is not None:
        report.invariants = _fixture_invariants(sc, source)
    else:
        report.invariants = _surface_invariants(sc, source)


def default_stages(sc: Scenario):
    return ("classify", "invariants") if sc.fixture is not None else STAGES


def run(sc: Scenario, stages=None) -> RunReport:
    """Execute the requested stages in dependency order."""
    stages = default_stages(sc) if stages is None else stages
    unknown = set(stages) - set(STAGES)
    stages = [s for s in STAGES if s in set(stages)]
    if unknown:
        raise ValidationError("stages", f"unknown stage(s) {sorted(unknown)}")
    if "converge" in stages and "classify" not in stages:
        raise StageDependencyError("stage 'converge' needs 'classify' (indices of characteristic points)")
    report = RunReport(sc.name, sc.digest, __version__, list(stages))
    for st in stages:
        t0 = time.perf_counter()
        {"classify": stage_classify, "converge": stage_converge, "invariants": stage_invariants}[st](sc, report)
        report.timing[st] = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------- output

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def to_json(obj, indent=0):
    """JSON text with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, np.integer, float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if hasattr(obj, "__dataclass_fields__"):
        return to_json({k: getattr(obj, k) for k in obj.__dataclass_fields__}, indent)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


POINT_COLUMNS = ("chart_id", "u", "v", "x", "y", "z", "trace", "det", "order", "lambda_k", "lambda_ambiguous",
                 "index_formula", "winding_index", "hat_K", "isolation_radius")
CONVERGENCE_COLUMNS = ("epsilon", "integral", "target", "abs_error", "quad_error")


def _csv(rows, columns):
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join("" if r[c] is None else _num(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


def report_tree(report: RunReport):
    return {
        "scenario": report.scenario,
        "digest": report.digest,
        "version": report.version,
        "stages": report.stages,
        "points": [{c: p.to_row()[c] for c in POINT_COLUMNS} for p in report.points],
        "euler": report.euler,
        "convergence": [{"phi": c["phi"], "rows": [vars(r) for r in c["rows"]]} for c in report.convergence],
        "mu_limit": report.mu_limit,
        "invariants_passed": report.passed,
    }


def emit(report: RunReport, out_dir, formats=("csv", "json")):
    """Write report artifacts; returns the written paths in a fixed order."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoError(str(out_dir), exc.strerror or str(exc)) from exc
    files = []

    def write(name, text):
        path = os.path.join(out_dir, name)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoError(path, exc.strerror or str(exc)) from exc
        files.append(path)

    if "csv" in formats:
        if "classify" in report.stages:
            write("charpoints.csv", _csv([p.to_row() for p in report.points], POINT_COLUMNS))
        for i, conv in enumerate(report.convergence):
            write(f"convergence_{i}.csv", _csv([vars(r) for r in conv["rows"]], CONVERGENCE_COLUMNS))
    if "json" in formats:
        if "invariants" in report.stages:
            write("invariants.json", to_json(report.invariants) + "\n")
        write("report.json", to_json(report_tree(report)) + "\n")
    return files
