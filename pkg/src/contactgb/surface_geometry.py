"""Chart-parametrized surfaces: pulled-back metrics, area forms, X and J^eps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .contact_core import ContactModel, ModelJets
from .errors import DegenerateImmersion
from .expr_engine import Expression, evaluate_on, parse
from .jets import Jet

CHART_VARS = ("u", "v")


@dataclass(frozen=True)
class Box:
    u0: float
    u1: float
    v0: float
    v1: float

    def contains(self, u, v):
        return (u > self.u0) & (u < self.u1) & (v > self.v0) & (v < self.v1)

    def bbox(self):
        return self.u0, self.u1, self.v0, self.v1

    def distance_to_boundary(self, u, v):
        return np.minimum.reduce([u - self.u0, self.u1 - u, v - self.v0, self.v1 - v])

    def to_json(self):
        return {"box": [self.u0, self.u1, self.v0, self.v1]}


@dataclass(frozen=True)
class Disk:
    cu: float
    cv: float
    radius: float

    def contains(self, u, v):
        return (u - self.cu) ** 2 + (v - self.cv) ** 2 < self.radius ** 2

    def bbox(self):
        return self.cu - self.radius, self.cu + self.radius, self.cv - self.radius, self.cv + self.radius

    def distance_to_boundary(self, u, v):
        return self.radius - np.hypot(u - self.cu, v - self.cv)

    def to_json(self):
        return {"disk": [self.cu, self.cv, self.radius]}


def domain_from_json(spec):
    if "box" in spec:
        return Box(*map(float, spec["box"]))
    if "disk" in spec:
        return Disk(*map(float, spec["disk"]))
    raise ValueError("domain needs a 'box' or 'disk' entry")


@dataclass(frozen=True)
class SurfaceChart:
    """Immersion (u, v) -> (x, y, z) with orientation and atlas weight."""

    immersion: tuple
    domain: object
    orientation: int = 1
    weight: Expression | None = None
    periodic: tuple = (False, False)
    name: str = "chart"

    def period(self, axis):
        lo, hi = self.domain.bbox()[2 * axis: 2 * axis + 2]
        return hi - lo


def make_chart(immersion, domain, orientation=1, weight=None, periodic=(False, False), name="chart"):
    imm = tuple(parse(s, CHART_VARS) if isinstance(s, str) else s for s in immersion)
    if len(imm) != 3:
        raise ValueError("immersion needs three components")
    w = parse(weight, CHART_VARS) if isinstance(weight, str) else weight
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    return SurfaceChart(imm, domain, orientation, w, tuple(periodic), name)


@dataclass
class CharFieldSample:
    X_chart: np.ndarray
    sr_norm: float
    divergence: float


class _Composer:
    """Substitutes the immersion increments into ambient Taylor polynomials."""

    def __init__(self, increments, order):
        self.powers = []
        cache = {}
        for alpha in jets.monomials(3, order):
            self.powers.append(jets._mono_power(alpha, increments, cache, increments[0]))
        self.template = increments[0]

    def __call__(self, field: Jet) -> Jet:
        out = Jet.constant(field.c[0], self.template.nvars, self.template.order)
        for i in range(1, len(self.powers)):
            out = out + self.powers[i] * field.c[i]
        return out


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


class SurfaceJets:
    """Every pulled-back quantity at a batch of chart points, as (u, v) jets.

    order is the jet order of the metric coefficients and of X; the
    immersion is expanded one order higher.
    """

    def __init__(self, chart: SurfaceChart, model: ContactModel, u, v, order: int = 2):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        self.shape = np.broadcast_shapes(u.shape, v.shape)
        u = np.broadcast_to(u, self.shape).ravel()
        v = np.broadcast_to(v, self.shape).ravel()
        self.u, self.v, self.order = u, v, order
        self.chart = chart
        env = dict(zip(CHART_VARS, jets.variables((u, v), order + 1, 2)))
        psi = [evaluate_on(e, env, nvars=2, order=order + 1) for e in chart.immersion]
        self.point = [p.value for p in psi]
        self.psi_u = [p.d(0) for p in psi]
        self.psi_v = [p.d(1) for p in psi]
        mj = ModelJets(model, self.point, order)
        comp = _Composer([p.truncate(order).nilpotent() for p in psi], order)
        omega = [comp(w) for w in mj.omega]
        nu1 = [comp(w) for w in mj.nu1]
        nu2 = [comp(w) for w in mj.nu2]
        V = [comp(w) for w in mj.V]
        pu, pv = self.psi_u, self.psi_v
        # omega restricted to S, and horizontal coframe components
        self.a = _dot(omega, pu)
        self.b = _dot(omega, pv)
        h1u, h1v = _dot(nu1, pu), _dot(nu1, pv)
        h2u, h2v = _dot(nu2, pu), _dot(nu2, pv)
        self.hor = (h1u * h1u + h2u * h2u, h1u * h1v + h2u * h2v, h1v * h1v + h2v * h2v)
        self.h = ((h1u, h1v), (h2u, h2v))
        cross = [pu[1] * pv[2] - pu[2] * pv[1], pu[2] * pv[0] - pu[0] * pv[2], pu[0] * pv[1] - pu[1] * pv[0]]
        self.domega_uv = _dot(V, cross)
        E1, F1, G1 = self.fff(1.0)
        det1 = E1 * G1 - F1 * F1
        if np.any(det1.value <= 0.0):
            raise DegenerateImmersion("EG - F^2 <= 0 for the eps = 1 metric")
        self.s1 = jets.sqrt(det1) * float(chart.orientation)
        inv_s = jets.reciprocal(self.s1)
        self.X = (self.b * inv_s, -self.a * inv_s)
        self.div = self.domega_uv * inv_s
        xu, xv = self.X
        # X is horizontal, so its g^1 length is the horizontal length
        p1 = h1u * xu + h1v * xv
        p2 = h2u * xu + h2v * xv
        self.norm2 = p1 * p1 + p2 * p2

    def fff(self, eps):
        Eh, Fh, Gh = self.hor
        k = 1.0 / eps
        return Eh + self.a * self.a * k, Fh + self.a * self.b * k, Gh + self.b * self.b * k

    def area(self, eps):
        """Signed area density of sigma^eps in du dv, as a jet."""
        E, F, G = self.fff(eps)
        det = E * G - F * F
        if np.any(det.value <= 0.0):
            raise DegenerateImmersion("EG - F^2 <= 0")
        return jets.sqrt(det) * float(self.chart.orientation)

    def reshape(self, arr):
        return np.asarray(arr).reshape(self.shape)


def _single(uv):
    return np.asarray(float(uv[0])), np.asarray(float(uv[1]))


def first_fundamental_form(chart, model, eps, uv, jet_order: int = 0):
    """Jets of (E, F, G) for g^eps pulled back to the chart."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    u, v = _single(uv)
    sj = SurfaceJets(chart, model, u, v, order=jet_order)
    E, F, G = sj.fff(eps)
    det = E.value * G.value - F.value ** 2
    if np.any(det <= 0):
        raise DegenerateImmersion(f"EG - F^2 = {jets.scalar(det)} at {tuple(uv)}")
    return E, F, G


def area_density(chart, model, eps, uv) -> float:
    u, v = _single(uv)
    sj = SurfaceJets(chart, model, u, v, order=0)
    return jets.scalar(sj.area(eps))


def characteristic_field(chart, model, uv) -> CharFieldSample:
    u, v = _single(uv)
    sj = SurfaceJets(chart, model, u, v, order=0)
    X = np.array([jets.scalar(sj.X[0]), jets.scalar(sj.X[1])])
    return CharFieldSample(X, np.sqrt(max(jets.scalar(sj.norm2), 0.0)), jets.scalar(sj.div))


def complex_structure(chart, model, eps, uv, tangent) -> np.ndarray:
    """J^eps acting on a chart tangent vector: sigma(v, J w) = g(v, w)."""
    u, v = _single(uv)
    sj = SurfaceJets(chart, model, u, v, order=0)
    E, F, G = (jets.scalar(j) for j in sj.fff(eps))
    s = jets.scalar(sj.area(eps))
    J = np.array([[-F, -G], [E, F]]) / s
    return J @ np.asarray(tangent, dtype=float)


def chart_weight(chart, u, v):
    if chart.weight is None:
        return np.ones(np.broadcast_shapes(np.shape(u), np.shape(v)))
    out = evaluate_on(chart.weight, {"u": np.asarray(u, float), "v": np.asarray(v, float)})
    return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast_shapes(np.shape(u), np.shape(v)))


def ambient_point(chart, u, v):
    env = {"u": np.asarray(u, float), "v": np.asarray(v, float)}
    shape = np.broadcast_shapes(np.shape(u), np.shape(v))
    return np.stack([np.broadcast_to(np.asarray(evaluate_on(e, env), float), shape) for e in chart.immersion], axis=-1)
