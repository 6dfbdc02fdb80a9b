"""Curvature densities K^eps sigma^eps, the eps-connection form and mu_{-1} = d(alpha).

Densities are 2-form coefficients in du ^ dv, so they integrate against
Lebesgue measure on positively oriented charts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import (DivergenceOutOfRange, DivergentTail, QuadratureNotConverged,
                     TooCloseToCharacteristicSet)
from .expr_engine import evaluate_on, parse
from .surface_geometry import CHART_VARS, Disk, SurfaceJets, ambient_point, chart_weight

FRAME_TOL = 1e-8


def b_eps(div_value, eps):
    """sqrt(1 - div^2 (1 - eps)); equals |X| at eps = 0 and sqrt(eps) on the characteristic set."""
    div_value = np.asarray(div_value, dtype=float)
    if np.any(np.abs(div_value) > 1.0 + 1e-12):
        raise DivergenceOutOfRange(f"|div| = {np.max(np.abs(div_value))} > 1")
    if eps < 0 or eps > 1:
        raise ValueError("eps must lie in [0, 1]")
    d2 = np.minimum(div_value * div_value, 1.0)
    out = np.sqrt(1.0 - d2 * (1.0 - eps))
    return float(out) if out.ndim == 0 else out


def brioschi(E, F, G):
    """Gaussian curvature from order-2 jets of the first fundamental form."""
    Eu, Ev = E.partial(0), E.partial(1)
    Fu, Fv = F.partial(0), F.partial(1)
    Gu, Gv = G.partial(0), G.partial(1)
    Evv, Fuv, Guu = E.partial(1, 1), F.partial(0, 1), G.partial(0, 0)
    e, f, g = E.value, F.value, G.value
    a11 = -0.5 * Evv + Fuv - 0.5 * Guu
    m1 = (a11 * (e * g - f * f)
          - 0.5 * Eu * ((Fv - 0.5 * Gu) * g - f * 0.5 * Gv)
          + (Fu - 0.5 * Ev) * ((Fv - 0.5 * Gu) * f - e * 0.5 * Gv))
    m2 = (-0.5 * Ev * (0.5 * Ev * g - f * 0.5 * Gu)
          + 0.5 * Gu * (0.5 * Ev * f - e * 0.5 * Gu))
    return (m1 - m2) / (e * g - f * f) ** 2


def k_sigma_density(sj: SurfaceJets, eps):
    """K^eps times the sigma^eps coefficient, as an array over the batch."""
    E, F, G = sj.fff(eps)
    return brioschi(E, F, G) * sj.area(eps).value


def alpha_form(sj: SurfaceJets):
    """Chart components of alpha = -(div/|X|) omega|_S as order-1 jets."""
    n2 = sj.norm2
    if np.any(n2.value <= FRAME_TOL ** 2):
        raise TooCloseToCharacteristicSet("|X| too small for alpha")
    ratio = sj.div * jets.reciprocal(jets.sqrt(n2))
    return -(ratio * sj.a), -(ratio * sj.b)


def mu_density(sj: SurfaceJets):
    """Coefficient of mu_{-1} = d(alpha) in du ^ dv."""
    au, av = alpha_form(sj)
    return av.partial(0) - au.partial(1)


def difference_density(sj: SurfaceJets, eps):
    return k_sigma_density(sj, eps) - mu_density(sj) / np.sqrt(eps)


def _single_jets(chart, model, uv, order=2):
    return SurfaceJets(chart, model, np.asarray(float(uv[0])), np.asarray(float(uv[1])), order=order)


def gaussian_curvature_eps(chart, model, eps, uv) -> float:
    sj = _single_jets(chart, model, uv)
    return jets.scalar(brioschi(*sj.fff(eps)))


def mu_minus_one_density(chart, model, uv) -> float:
    return jets.scalar(mu_density(_single_jets(chart, model, uv)))


# ---------------------------------------------------------------- eps-frames

@dataclass
class EpsFrameSample:
    b_eps: float
    theta1: np.ndarray
    theta2: np.ndarray
    c1: float
    c2: float
    eta_eps: np.ndarray
    d_eta: float


class FrameJets:
    """Orthonormal frame e1 = X/|X|, e2 = J e1 of g^1 and its coframe, as jets."""

    def __init__(self, sj: SurfaceJets):
        if np.any(sj.norm2.value <= FRAME_TOL ** 2):
            raise TooCloseToCharacteristicSet("frame undefined near the characteristic set")
        self.sj = sj
        self.normX = jets.sqrt(sj.norm2)
        inv = jets.reciprocal(self.normX)
        e1u, e1v = sj.X[0] * inv, sj.X[1] * inv
        E, F, G = sj.fff(1.0)
        si = jets.reciprocal(sj.s1)
        e2u = (-(F * e1u) - G * e1v) * si
        e2v = (E * e1u + F * e1v) * si
        self.e1 = (e1u, e1v)
        self.e2 = (e2u, e2v)
        det = e1u * e2v - e2u * e1v
        idet = jets.reciprocal(det)
        self.theta1 = (e2v * idet, -(e2u * idet))
        self.theta2 = (-(e1v * idet), e1u * idet)
        # theta1 ^ theta2 = idet du ^ dv
        self.c1 = _exterior(self.theta1) * det.truncate(1)
        self.c2 = _exterior(self.theta2) * det.truncate(1)

    def nabla_X(self):
        """(nabla X)^i_j of the g^1 Levi-Civita connection, as order-1 jets."""
        sj = self.sj
        E, F, G = sj.fff(1.0)
        Gam = christoffel(E, F, G)
        X = sj.X
        out = [[None, None], [None, None]]
        for i in range(2):
            for j in range(2):
                out[i][j] = X[i].d(j) + Gam[i][j][0] * X[0].truncate(1) + Gam[i][j][1] * X[1].truncate(1)
        return out

    def closed_form_c(self):
        """c1, c2 from covariant derivatives of X (cross-check of the coframe route)."""
        sj = self.sj
        N = self.nabla_X()
        E, F, G = (m.truncate(1) for m in sj.fff(1.0))
        e1 = [c.truncate(1) for c in self.e1]
        e2 = [c.truncate(1) for c in self.e2]

        def g(a, b):
            return E * a[0] * b[0] + F * (a[0] * b[1] + a[1] * b[0]) + G * a[1] * b[1]

        def apply(vec):
            return [N[0][0] * vec[0] + N[0][1] * vec[1], N[1][0] * vec[0] + N[1][1] * vec[1]]

        div = sj.div.truncate(1)
        inv = jets.reciprocal(self.normX.truncate(1))
        c2 = (div - g(apply(e1), e1)) * inv
        Ef, Ff, Gf = sj.fff(1.0)
        si = jets.reciprocal(sj.s1)
        Yu = (-(Ff * sj.X[0]) - Gf * sj.X[1]) * si
        Yv = (Ef * sj.X[0] + Ff * sj.X[1]) * si
        divJX = ((sj.s1 * Yu).d(0) + (sj.s1 * Yv).d(1)) * jets.reciprocal(sj.s1.truncate(1))
        c1 = (g(apply(e2), e1) - divJX) * inv
        return c1, c2


def _exterior(form):
    """Coefficient of d(form) in du ^ dv."""
    return form[1].d(0) - form[0].d(1)


def christoffel(E, F, G):
    """Gam[i][j][k] = Gamma^i_{jk} as order-(n-1) jets."""
    Eu, Ev, Fu, Fv, Gu, Gv = E.d(0), E.d(1), F.d(0), F.d(1), G.d(0), G.d(1)
    e, f, g = E.truncate(Eu.order), F.truncate(Eu.order), G.truncate(Eu.order)
    inv = jets.reciprocal((e * g - f * f) * 2.0)
    uuu = (g * Eu - 2.0 * f * Fu + f * Ev) * inv
    vuu = (2.0 * e * Fu - e * Ev - f * Eu) * inv
    uuv = (g * Ev - f * Gu) * inv
    vuv = (e * Gu - f * Ev) * inv
    uvv = (2.0 * g * Fv - g * Gu - f * Gv) * inv
    vvv = (e * Gv - 2.0 * f * Fv + f * Gu) * inv
    return [[[uuu, uuv], [uuv, uvv]], [[vuu, vuv], [vuv, vvv]]]


def eta_eps_jets(fr: FrameJets, eps, c=None):
    """Chart components of eta^eps as order-1 jets, and b_eps as an order-2 jet."""
    sj = fr.sj
    div = sj.div
    b = jets.sqrt(1.0 - div * div * (1.0 - eps))
    e1b = fr.e1[0].truncate(1) * b.d(0) + fr.e1[1].truncate(1) * b.d(1)
    c1, c2 = (fr.c1, fr.c2) if c is None else c
    b1 = b.truncate(1)
    rs = np.sqrt(eps)
    t1 = [t.truncate(1) for t in fr.theta1]
    t2 = [t.truncate(1) for t in fr.theta2]
    k1 = -(c1 * jets.reciprocal(b1)) * rs
    k2 = -(c2 * b1) / rs - e1b / rs
    eta = (k1 * t1[0] + k2 * t2[0], k1 * t1[1] + k2 * t2[1])
    return eta, b


def connection_form_eps(chart, model, eps, uv, use_closed_form=True) -> EpsFrameSample:
    """eta^eps of the eps-frame at a chart point off the characteristic set."""
    sj = _single_jets(chart, model, uv)
    fr = FrameJets(sj)
    c = fr.closed_form_c() if use_closed_form else (fr.c1, fr.c2)
    eta, b = eta_eps_jets(fr, eps, c)
    return EpsFrameSample(
        b_eps=jets.scalar(b),
        theta1=np.array([jets.scalar(t) for t in fr.theta1]),
        theta2=np.array([jets.scalar(t) for t in fr.theta2]),
        c1=jets.scalar(c[0]),
        c2=jets.scalar(c[1]),
        eta_eps=np.array([jets.scalar(e) for e in eta]),
        d_eta=jets.scalar(eta[1].partial(0) - eta[0].partial(1)),
    )


def alpha_value(chart, model, uv) -> np.ndarray:
    au, av = alpha_form(_single_jets(chart, model, uv, order=1))
    return np.array([jets.scalar(au), jets.scalar(av)])


# ---------------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunction:
    """phi as an expression in chart (u, v) or ambient (x, y, z) coordinates.

    `support` optionally names a chart-domain subset outside which phi
    vanishes; integration is then restricted to it.
    """

    expr: object
    ambient: bool = False
    support: object = None

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, chart, u, v):
        if self.ambient:
            xyz = ambient_point(chart, u, v)
            env = dict(zip(("x", "y", "z"), np.moveaxis(xyz, -1, 0)))
        else:
            env = {"u": u, "v": v}
        out = evaluate_on(self.expr, env)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(u))


def make_test_function(source, ambient=False, support=None) -> TestFunction:
    vars_ = ("x", "y", "z") if ambient else CHART_VARS
    return TestFunction(parse(source, vars_), ambient, support)


# ---------------------------------------------------------------- quadrature rules

@dataclass(frozen=True)
class QuadSpec:
    angular: int = 48
    radial: int = 64
    patch_ratio: float = 0.7
    inner_fraction: float = 1e-6
    patch_cap: float = 0.1
    outer_panel_nodes: int = 8
    tol: float = 1e-3  # on the estimate, relative once |value| > 1
    chunk: int = 20000

    def refined(self):
        return QuadSpec(2 * self.angular, 2 * self.radial, self.patch_ratio, self.inner_fraction,
                        self.patch_cap, 2 * self.outer_panel_nodes, self.tol, self.chunk)


_SHIFT = (np.sqrt(5.0) - 1.0) / 2.0


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _panels(edges, n):
    """GL nodes and weights on consecutive intervals given by `edges`."""
    x, w = _gl(n)
    a, b = edges[:-1], edges[1:]
    nodes = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
    weights = ((b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights


def _ray_length(domain, q, th):
    """Distance from q to the domain boundary along direction th."""
    c, s = np.cos(th), np.sin(th)
    if isinstance(domain, Disk):
        du, dv = q[0] - domain.cu, q[1] - domain.cv
        proj = du * c + dv * s
        return -proj + np.sqrt(proj ** 2 - (du * du + dv * dv) + domain.radius ** 2)
    with np.errstate(divide="ignore"):
        tu = np.where(c > 0, (domain.u1 - q[0]) / c, np.where(c < 0, (domain.u0 - q[0]) / c, np.inf))
        tv = np.where(s > 0, (domain.v1 - q[1]) / s, np.where(s < 0, (domain.v0 - q[1]) / s, np.inf))
    return np.minimum(tu, tv)


def _trapezoid_angles(n):
    th = 2 * np.pi * (np.arange(n) + _SHIFT) / n
    return th, np.full(n, 2 * np.pi / n)


def _outer_angles(domain, q, n):
    """Angular rule for the outer region; GL sectors split at box corners."""
    if isinstance(domain, Disk):
        return _trapezoid_angles(n)
    corners = [(domain.u0, domain.v0), (domain.u1, domain.v0), (domain.u1, domain.v1), (domain.u0, domain.v1)]
    cut = np.sort(np.mod([np.arctan2(cv - q[1], cu - q[0]) for cu, cv in corners], 2 * np.pi))
    edges = np.concatenate([cut, [cut[0] + 2 * np.pi]])
    per = max(4, int(np.ceil(n / 4)))
    return _panels(edges, per)


@dataclass
class NodeSet:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    inner_ring: np.ndarray  # mask of the innermost radial nodes
    r_in: float
    anchor: tuple


def polar_nodes(domain, q, r0, spec: QuadSpec) -> NodeSet:
    """Polar rule about q over the domain: graded disc r < r0, log-spaced beyond."""
    r_in = spec.inner_fraction * r0
    npan = int(np.ceil(np.log(spec.inner_fraction) / np.log(spec.patch_ratio)))
    edges = r0 * spec.patch_ratio ** np.arange(npan + 1)
    edges[-1] = r_in
    edges = edges[::-1]
    per = max(2, int(np.ceil(spec.radial / npan)))
    rr, wr = _panels(edges, per)
    th, wt = _trapezoid_angles(spec.angular)
    R, T = np.meshgrid(rr, th, indexing="ij")
    W = (wr * rr)[:, None] * wt[None, :]
    inner_mask = np.zeros_like(R, dtype=bool)
    inner_mask[0, :] = True
    us, vs, ws, masks = [q[0] + R * np.cos(T)], [q[1] + R * np.sin(T)], [W], [inner_mask]
    # outer region, in s = log(r / r0) per ray
    tho, wto = _outer_angles(domain, q, spec.angular)
    Rmax = _ray_length(domain, q, tho)
    if np.any(Rmax > r0 * (1 + 1e-12)):
        nout = max(1, int(np.ceil(np.log(Rmax.max() / r0) / -np.log(spec.patch_ratio))))
        po = spec.outer_panel_nodes or per
        s, ws_ = _panels(np.linspace(0.0, 1.0, nout + 1), po)
        L = np.log(np.maximum(Rmax, r0) / r0)
        Ro = r0 * np.exp(s[:, None] * L[None, :])
        Wo = ws_[:, None] * (Ro * Ro * L[None, :]) * wto[None, :]
        To = np.broadcast_to(tho[None, :], Ro.shape)
        us.append(q[0] + Ro * np.cos(To))
        vs.append(q[1] + Ro * np.sin(To))
        ws.append(Wo)
        masks.append(np.zeros_like(Ro, dtype=bool))
    cat = lambda arrs: np.concatenate([a.ravel() for a in arrs])
    return NodeSet(cat(us), cat(vs), cat(ws), cat(masks), r_in, tuple(q))


def patch_radius(domain, q, isolation_radius, spec: QuadSpec):
    d = float(domain.distance_to_boundary(q[0], q[1]))
    return min(0.5 * isolation_radius, spec.patch_cap, 0.5 * d)


def _anchor_weights(anchors, u, v, i):
    """Smooth partition among several anchors: zeta_i = prod_{j != i} d_j^2 / sum_m prod_{j != m} d_j^2."""
    if len(anchors) == 1:
        return np.ones_like(u)
    d2 = np.array([(u - a[0]) ** 2 + (v - a[1]) ** 2 for a in anchors])
    prods = np.array([np.prod(np.delete(d2, m, axis=0), axis=0) for m in range(len(anchors))])
    return prods[i] / prods.sum(axis=0)


# ---------------------------------------------------------------- integration

KINDS = ("K_eps_sigma_eps", "mu_minus_one", "difference", "inv_norm")


class _ChartCache:
    """Nodes, geometry jets and fixed weights of one chart at one refinement level."""

    def __init__(self, chart, model, anchors, radii, spec, phi, domain):
        self.chart = chart
        self.parts = []
        for i, (q, r0) in enumerate(zip(anchors, radii)):
            ns = polar_nodes(domain, q, r0, spec)
            keep = domain.contains(ns.u, ns.v) | ns.inner_ring
            u, v, w, ring = ns.u[keep], ns.v[keep], ns.w[keep], ns.inner_ring[keep]
            factor = _anchor_weights(anchors, u, v, i) * chart_weight(chart, u, v)
            if phi is not None:
                factor = factor * phi(chart, u, v)
            live = factor != 0.0
            u, v, w, ring, factor = u[live], v[live], w[live], ring[live], factor[live]
            chunks = [SurfaceJets(chart, model, u[k:k + spec.chunk], v[k:k + spec.chunk], order=2)
                      for k in range(0, len(u), spec.chunk)]
            r = np.hypot(u - q[0], v - q[1])
            ring_w = np.zeros_like(u)
            ring_w[ring] = 2 * np.pi / max(1, int(ring.sum()))
            self.parts.append((chunks, w * factor, ring, ns.r_in, factor * r, ring_w[ring]))

    def integrate(self, kind, eps):
        total = 0.0
        dropped = 0.0
        for chunks, weights, ring, r_in, factor_r, ring_w in self.parts:
            if not chunks:
                continue
            dens = np.concatenate([density(sj, kind, eps) for sj in chunks])
            total += float(np.sum(dens * weights))
            if ring.any():
                # the disc r < r_in gets the leading 1/r term read off the innermost ring,
                # and |phi f r| there bounds what that model leaves out
                fr = dens[ring] * factor_r[ring]
                total += r_in * float(np.sum(fr * ring_w))
                dropped += 2 * np.pi * r_in * float(np.max(np.abs(fr)))
        return total * self.chart.orientation, dropped


def density(sj: SurfaceJets, kind: str, eps=None):
    """Density of the named measure in du dv (signed by the chart orientation)."""
    if kind == "K_eps_sigma_eps":
        return k_sigma_density(sj, eps)
    if kind == "mu_minus_one":
        return mu_density(sj)
    if kind == "difference":
        return difference_density(sj, eps)
    if kind == "inv_norm":
        return sj.area(1.0).value / np.sqrt(sj.norm2.value)
    raise ValueError(f"unknown density kind {kind!r}; expected one of {KINDS}")


@dataclass
class IntegralResult:
    value: float
    error: float
    coarse: float


class Integrator:
    """Two-level quadrature over an atlas with cached, eps-independent geometry.

    `points` are characteristic points (objects with chart_id, uv and
    isolation_radius); they anchor the graded polar patches.
    """

    def __init__(self, charts, model, points=(), phi: TestFunction | None = None, spec: QuadSpec = QuadSpec()):
        self.spec = spec
        self.levels = []
        plans = []
        for cid, chart in enumerate(charts):
            domain = chart.domain
            if phi is not None and phi.support is not None:
                domain = phi.support
            own = [p for p in points if p.chart_id == cid and domain.contains(p.uv[0], p.uv[1])]
            if own:
                anchors = [tuple(p.uv) for p in own]
                radii = [patch_radius(domain, p.uv, p.isolation_radius, spec) for p in own]
            else:
                u0, u1, v0, v1 = domain.bbox()
                c = (0.5 * (u0 + u1), 0.5 * (v0 + v1))
                anchors = [c]
                radii = [min(spec.patch_cap, 0.5 * float(domain.distance_to_boundary(*c)))]
            plans.append((chart, anchors, radii, domain))
        for level_spec in (spec, spec.refined()):
            self.levels.append([_ChartCache(ch, model, a, r, level_spec, phi, d) for ch, a, r, d in plans])

    def integrate(self, kind, eps=None, tol=None) -> IntegralResult:
        if kind in ("K_eps_sigma_eps", "difference") and (eps is None or eps <= 0):
            raise ValueError("epsilon must be positive")
        vals = []
        drop = 0.0
        for caches in self.levels:
            parts = [c.integrate(kind, eps) for c in caches]
            vals.append(sum(p[0] for p in parts))
            drop = sum(p[1] for p in parts)
        err = abs(vals[1] - vals[0]) + drop
        tol = self.spec.tol if tol is None else tol
        if err > tol * max(1.0, abs(vals[1])):
            raise QuadratureNotConverged(f"{kind} at eps={eps}: error estimate {err:.3e} > {tol:.1e}")
        return IntegralResult(vals[1], err, vals[0])


def integrate_measure(charts, model, kind, eps=None, phi=None, points=(), spec: QuadSpec = QuadSpec()):
    """(value, error estimate) of the pairing of phi with the named measure."""
    res = Integrator(charts, model, points, phi, spec).integrate(kind, eps)
    return res.value, res.error


# ---------------------------------------------------------------- experiments

@dataclass
class ConvergenceRow:
    epsilon: float
    integral: float
    target: float
    abs_error: float
    quad_error: float


def default_sweep(count: int = 9):
    return [4.0 ** -j for j in range(count)]


def delta_target(charts, points, phi: TestFunction | None):
    """2 pi sum phi(q) ind(q) over classified characteristic points."""
    total = 0.0
    for p in points:
        if p.winding_index is None:
            raise ValueError(f"point {p.uv} has no index")
        val = 1.0 if phi is None else jets.scalar(phi(charts[p.chart_id], np.array(p.uv[0]), np.array(p.uv[1])))
        total += val * p.winding_index
    return 2 * np.pi * total


def convergence_table(charts, model, points, phi=None, sweep=None, spec: QuadSpec = QuadSpec(),
                      integrator: Integrator | None = None):
    """I(eps) = integral of phi (K^eps sigma^eps - mu_{-1}/sqrt(eps)) along a sweep."""
    sweep = default_sweep() if sweep is None else sweep
    integ = integrator or Integrator(charts, model, points, phi, spec)
    target = delta_target(charts, points, phi)
    rows = []
    for eps in sorted(sweep, reverse=True):
        res = integ.integrate("difference", eps)
        rows.append(ConvergenceRow(eps, res.value, target, abs(res.value - target), res.error))
    return rows


@dataclass
class MuLimitReport:
    max_deviation: float
    deviations: list
    mu_direct: float
    mu_direct_error: float
    mu_extrapolated: float


def mu_limit_check(charts, model, points, phi=None, sweep=None, spec: QuadSpec = QuadSpec(),
                   integrator: Integrator | None = None) -> MuLimitReport:
    """Compare sqrt(eps) times the K^eps sigma^eps pairing with the mu_{-1} pairing."""
    sweep = sorted(default_sweep() if sweep is None else sweep, reverse=True)
    integ = integrator or Integrator(charts, model, points, phi, spec)
    mu = integ.integrate("mu_minus_one")
    scaled = [np.sqrt(e) * integ.integrate("K_eps_sigma_eps", e).value for e in sweep]
    devs = [abs(s - mu.value) for s in scaled]
    if len(sweep) >= 2:
        # the leading correction is linear in sqrt(eps)
        s1, s2 = np.sqrt(sweep[-2]), np.sqrt(sweep[-1])
        extrap = (s1 * scaled[-1] - s2 * scaled[-2]) / (s1 - s2)
    else:
        extrap = scaled[-1]
    return MuLimitReport(max(devs), devs, mu.value, mu.error, float(extrap))


# ---------------------------------------------------------------- integrability probe

@dataclass
class ProbeResult:
    radii: list
    annuli: list
    cumulative: list
    tail: float
    ratio: float


_GOLD = (np.sqrt(5.0) - 1.0) / 2.0
ZERO_RATIO = 1e-30


def _golden(f, lo, hi, iters):
    """Batched golden-section minimisation of f over [lo, hi] elementwise."""
    lo, hi = lo.copy(), hi.copy()
    for _ in range(iters):
        a = hi - _GOLD * (hi - lo)
        b = lo + _GOLD * (hi - lo)
        fa, fb = np.split(f(np.concatenate([a, b]), twice=True), 2)
        left = fa < fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
    return 0.5 * (lo + hi)


def _ring_rules(fld, q, rs, base=256, n_gl=8):
    """Nodes (u, v, weight in dtheta) on each circle |p - q| = r.

    Near every dip of |X| the circle is parametrised by the offset s along
    the tangent at the dip, p(s) = q + sqrt(r^2 - s^2) e_m + s e_perp, so
    that dips much narrower than the float spacing of angles near the dip
    are still resolved.  Panels are graded geometrically toward the
    refined minimum.
    """
    rs = np.asarray(rs, dtype=float)
    nr = len(rs)
    th = 2 * np.pi * (np.arange(base) + _SHIFT) / base
    h = 2 * np.pi / base
    U = q[0] + rs[:, None] * np.cos(th)[None, :]
    V = q[1] + rs[:, None] * np.sin(th)[None, :]
    _, nrm = fld.values(U.ravel(), V.ravel())
    nrm = nrm.reshape(nr, base)
    top = nrm.max(axis=1)
    if not np.all(np.isfinite(top)) or np.any(top == 0.0):
        raise DivergentTail("|X| vanishes identically on a probe ring")
    dips = []  # (ring index, sample index)
    for i in range(nr):
        row = nrm[i]
        cand = np.nonzero((row <= np.roll(row, 1)) & (row <= np.roll(row, -1)) & (row < 0.5 * np.median(row)))[0]
        for j in cand[np.argsort(row[cand])][:8]:
            dips.append((i, j))
    rules = [None] * nr
    if dips:
        ri = np.array([d[0] for d in dips])
        r_d = rs[ri]

        def f_theta(t, twice=False):
            rr = np.concatenate([r_d, r_d]) if twice else r_d
            return fld.values(q[0] + rr * np.cos(t), q[1] + rr * np.sin(t))[1]

        tj = np.array([th[d[1]] for d in dips])
        tm = _golden(f_theta, tj - h, tj + h, 60)
        em = np.stack([np.cos(tm), np.sin(tm)])
        ep = np.stack([-np.sin(tm), np.cos(tm)])

        def point(s, twice=False):
            rr = np.concatenate([r_d, r_d]) if twice else r_d
            e_m = np.concatenate([em, em], axis=1) if twice else em
            e_p = np.concatenate([ep, ep], axis=1) if twice else ep
            c = np.sqrt(np.maximum(rr * rr - s * s, 0.0))
            return q[0] + c * e_m[0] + s * e_p[0], q[1] + c * e_m[1] + s * e_p[1]

        def f_s(s, twice=False):
            return fld.values(*point(s, twice))[1]

        span = r_d * np.sin(0.5 * h)
        s_star = _golden(f_s, -span, span, 170)
        fmin = f_s(s_star)
        if np.any(fmin <= ZERO_RATIO * top[ri]):
            k = int(np.argmin(fmin / top[ri]))
            raise DivergentTail(f"|X| vanishes on the ring r = {r_d[k]:.3e} near angle {tm[k]:.6f}")
        slope = top[ri] / r_d
        width = fmin / slope
        theta_star = tm + np.arcsin(np.clip(s_star / r_d, -1, 1))
    x, w = _gl(n_gl)
    for i in range(nr):
        r = rs[i]
        mine = [k for k in range(len(dips)) if dips[k][0] == i] if dips else []
        if not mine:
            rules[i] = (q[0] + r * np.cos(th), q[1] + r * np.sin(th), np.full(base, h))
            continue
        mine.sort(key=lambda k: np.mod(theta_star[k], 2 * np.pi))
        centers = np.mod(theta_star[mine], 2 * np.pi)
        gaps = np.diff(np.concatenate([centers, [centers[0] + 2 * np.pi]]))
        prev_gaps = np.roll(gaps, 1)
        us, vs, ws = [], [], []
        for n_k, k in enumerate(mine):
            d0 = min(0.25, 0.45 * gaps[n_k], 0.45 * prev_gaps[n_k])
            S = r * np.sin(d0)
            for sign in (-1.0, 1.0):
                edges = [S]
                while edges[-1] > 1e-3 * width[k]:
                    edges.append(edges[-1] * 0.25)
                edges.append(0.0)
                e = np.array(edges[::-1])
                a, b = e[:-1], e[1:]
                d = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
                dw = ((b - a)[:, None] * w[None, :]).ravel()
                s_nodes = s_star[k] + sign * d
                c = np.sqrt(r * r - s_nodes ** 2)
                us.append(q[0] + c * em[0, k] + s_nodes * ep[0, k])
                vs.append(q[1] + c * em[1, k] + s_nodes * ep[1, k])
                ws.append(dw / c)
            # plain angular panels up to the next window
            lo = centers[n_k] + np.arcsin(min(1.0, (s_star[k] + S) / r)) - np.arcsin(min(1.0, s_star[k] / r))
            nxt = mine[(n_k + 1) % len(mine)]
            d1 = min(0.25, 0.45 * gaps[(n_k + 1) % len(mine)], 0.45 * gaps[n_k])
            S1 = r * np.sin(d1)
            hi = centers[n_k] + gaps[n_k] + np.arcsin(max(-1.0, (s_star[nxt] - S1) / r)) - np.arcsin(
                max(-1.0, min(1.0, s_star[nxt] / r)))
            npan = max(1, int(np.ceil((hi - lo) / (8 * h))))
            tt, tw = _panels(np.linspace(lo, hi, npan + 1), n_gl)
            us.append(q[0] + r * np.cos(tt))
            vs.append(q[1] + r * np.sin(tt))
            ws.append(tw)
        rules[i] = (np.concatenate(us), np.concatenate(vs), np.concatenate(ws))
    return rules


def inv_norm_integrability_probe(fld, q, radii=None, n_radial: int = 12, tol: float = 1e-3) -> ProbeResult:
    """Integrals of |X|^-1 sigma^1 over the annuli between consecutive radii.

    Radii must decrease.  A zero of X on a probe ring, or annulus integrals
    that stop shrinking, raise DivergentTail.
    """
    q = np.asarray(q, dtype=float)
    if radii is None:
        r_top = min(0.1, 0.5 * float(fld.domain.distance_to_boundary(q[0], q[1])))
        radii = list(r_top * 0.5 ** np.arange(0, 18))
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])) or len(radii) < 3:
        raise ValueError("radii must be a decreasing list of at least three values")
    s, ws = _gl(n_radial)
    logs = np.log(np.array(radii[:-1]) / np.array(radii[1:]))
    rings = (np.array(radii[1:])[:, None] * np.exp(s[None, :] * logs[:, None])).ravel()
    radial_w = (ws[None, :] * logs[:, None]).ravel()
    us, vs, weights, owner = [], [], [], []
    for i, (r, wk, (u, v, wt)) in enumerate(zip(rings, radial_w, _ring_rules(fld, q, rings))):
        us.append(u)
        vs.append(v)
        weights.append(wk * r * r * wt)
        owner.append(np.full(len(u), i // len(s)))
    u, v = np.concatenate(us), np.concatenate(vs)
    _, nrm = fld.values(u, v)
    contrib = np.concatenate(weights) * fld.area_density(u, v) / nrm
    annuli = [float(a) for a in np.bincount(np.concatenate(owner), contrib, minlength=len(radii) - 1)]
    cumulative = list(np.cumsum(annuli))
    ratio = annuli[-1] / annuli[-2] if annuli[-2] > 0 else np.inf
    if not ratio < 1.0:
        raise DivergentTail(f"annulus integrals stop shrinking (ratio {ratio:.3f})")
    tail = annuli[-1] * ratio / (1.0 - ratio)
    return ProbeResult(radii, annuli, cumulative, float(tail), float(ratio))


# ---------------------------------------------------------------- domination

def domination_constants(chart, model, eps_list, points=(), n: int = 41, min_norm: float = 1e-8):
    """max |difference density| |X| per eps, over a chart grid plus log-polar rings about each point."""
    u0, u1, v0, v1 = chart.domain.bbox()
    U, V = np.meshgrid(np.linspace(u0, u1, n), np.linspace(v0, v1, n), indexing="ij")
    us, vs = [U.ravel()], [V.ravel()]
    for p in points:
        r_hi = 0.5 * min(p.isolation_radius, float(chart.domain.distance_to_boundary(*p.uv)))
        R, T = np.meshgrid(np.geomspace(1e-6 * r_hi, r_hi, n), 2 * np.pi * (np.arange(n) + _SHIFT) / n,
                           indexing="ij")
        us.append(p.uv[0] + (R * np.cos(T)).ravel())
        vs.append(p.uv[1] + (R * np.sin(T)).ravel())
    u, v = np.concatenate(us), np.concatenate(vs)
    inside = chart.domain.contains(u, v)
    u, v = u[inside], v[inside]
    sj = SurfaceJets(chart, model, u, v, order=2)
    ok = sj.norm2.value > min_norm ** 2
    if not ok.all():
        sj = SurfaceJets(chart, model, u[ok], v[ok], order=2)
    nx = np.sqrt(sj.norm2.value)
    return [float(np.max(np.abs(difference_density(sj, e)) * nx)) for e in eps_list]


# ---------------------------------------------------------------- gridded export

def density_grid(chart, model, kind, eps=None, n: int = 101, skip_radius: float = 1e-6):
    """Rows (u, v, density) on an n x n grid of the chart bounding box, inside the domain."""
    u0, u1, v0, v1 = chart.domain.bbox()
    U, V = np.meshgrid(np.linspace(u0, u1, n), np.linspace(v0, v1, n), indexing="ij")
    U, V = U.ravel(), V.ravel()
    inside = chart.domain.contains(U, V)
    U, V = U[inside], V[inside]
    sj = SurfaceJets(chart, model, U, V, order=2)
    if kind in ("mu_minus_one", "difference", "inv_norm"):
        ok = sj.norm2.value > max(skip_radius, FRAME_TOL) ** 2
        if not ok.all():
            U, V = U[ok], V[ok]
            sj = SurfaceJets(chart, model, U, V, order=2)
    vals = density(sj, kind, eps)
    return np.column_stack([U, V, vals])
