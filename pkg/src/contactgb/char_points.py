"""Characteristic points: location, classification, indices and Euler characteristic."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import solve_ivp

from . import jets
from .errors import (AngleUnwrapFailed, CurveTracingFailed, EigenvaluesCoalesce,
                     InvalidOrder, NonIsolatedCharacteristicSet, NotACharacteristicPoint,
                     NotAKernelExtension, OrderExceedsKmax, TraceVanishes,
                     UnclassifiedPoint, ContactTopologyWarning)
from .expr_engine import evaluate, evaluate_on, parse
from .surface_geometry import Box, SurfaceJets, ambient_point

DEGENERACY_TOL = 1e-6
FIT_DEGREE = 24
WINDOW_RATIO = 0.2


# ---------------------------------------------------------------- field sources

class ChartField:
    """Characteristic field of a surface chart in a contact model."""

    euclidean = False

    def __init__(self, chart, model, chart_id=0):
        self.chart = chart
        self.model = model
        self.domain = chart.domain
        self.periodic = chart.periodic
        self.chart_id = chart_id

    def sample(self, u, v, order=1):
        """Returns X jets, (E, F, G) jets of g^1 and the divergence jet."""
        sj = SurfaceJets(self.chart, self.model, u, v, order=order)
        return sj.X, sj.fff(1.0), sj.div

    def values(self, u, v):
        sj = SurfaceJets(self.chart, self.model, u, v, order=0)
        X = np.stack([sj.X[0].value, sj.X[1].value])
        return X, np.sqrt(np.maximum(sj.norm2.value, 0.0))

    def area_density(self, u, v):
        sj = SurfaceJets(self.chart, self.model, u, v, order=0)
        return np.abs(sj.area(1.0).value)

    def ambient(self, u, v):
        return ambient_point(self.chart, u, v)


class PlanarField:
    """Synthetic planar vector field with the Euclidean metric (fixture mode)."""

    euclidean = True

    def __init__(self, xu, xv, domain=Box(-1.0, 1.0, -1.0, 1.0), variables=("x", "y")):
        self.exprs = tuple(parse(e, variables) if isinstance(e, str) else e for e in (xu, xv))
        self.variables = tuple(variables)
        self.domain = domain
        self.periodic = (False, False)
        self.chart_id = 0

    def _eval(self, u, v, order):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(u.shape, v.shape)
        u = np.broadcast_to(u, shape).ravel()
        v = np.broadcast_to(v, shape).ravel()
        env = dict(zip(self.variables, jets.variables((u, v), order, 2)))
        return [evaluate_on(e, env, nvars=2, order=order) for e in self.exprs], u.shape

    def sample(self, u, v, order=1):
        X, shape = self._eval(u, v, order)
        one = jets.Jet.constant(np.ones(shape), 2, order)
        zero = jets.Jet.constant(np.zeros(shape), 2, order)
        div = X[0].d(0) + X[1].d(1) if order >= 1 else None
        return X, (one, zero, one), div

    def values(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(u.shape, v.shape)
        env = dict(zip(self.variables, (np.broadcast_to(u, shape).ravel(), np.broadcast_to(v, shape).ravel())))
        n = env[self.variables[0]].size
        Xv = np.stack([np.broadcast_to(np.asarray(evaluate(e.root, env), dtype=float), (n,)) for e in self.exprs])
        return Xv, np.hypot(Xv[0], Xv[1])

    def area_density(self, u, v):
        return np.ones(np.broadcast_shapes(np.shape(u), np.shape(v)))

    def ambient(self, u, v):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        return np.stack([u, v, np.zeros_like(u)], axis=-1)


def _christoffel_values(E, F, G):
    e, f, g = E.value, F.value, G.value
    Eu, Ev, Fu, Fv, Gu, Gv = (M.partial(i) for M in (E, F, G) for i in (0, 1))
    two_d = 2.0 * (e * g - f * f)
    Gam = np.empty((2, 2, 2) + np.shape(e))
    Gam[0, 0, 0] = (g * Eu - 2 * f * Fu + f * Ev) / two_d
    Gam[1, 0, 0] = (2 * e * Fu - e * Ev - f * Eu) / two_d
    Gam[0, 0, 1] = Gam[0, 1, 0] = (g * Ev - f * Gu) / two_d
    Gam[1, 0, 1] = Gam[1, 1, 0] = (e * Gu - f * Ev) / two_d
    Gam[0, 1, 1] = (2 * g * Fv - g * Gu - f * Gv) / two_d
    Gam[1, 1, 1] = (e * Gv - 2 * f * Fv + f * Gu) / two_d
    return Gam


def nabla_values(fld, u, v):
    """Covariant derivative (nabla X)^i_j at points, shape (N, 2, 2), plus metric (N, 3)."""
    X, (E, F, G), _ = fld.sample(u, v, order=1)
    N = np.empty((X[0].value.size, 2, 2))
    for i in range(2):
        for j in range(2):
            N[:, i, j] = X[i].partial(j)
    if not fld.euclidean:
        Gam = _christoffel_values(E, F, G)
        Xv = np.stack([X[0].value, X[1].value])
        N += np.einsum("ijkn,kn->nij", Gam, Xv)
    metric = np.stack([E.value, F.value, G.value], axis=-1) * np.ones((N.shape[0], 1))
    return N, metric


def _inside(fld, u, v, margin=0.0):
    return fld.domain.distance_to_boundary(np.asarray(u), np.asarray(v)) > margin


# ---------------------------------------------------------------- records

@dataclass
class CharPoint:
    chart_id: int
    uv: tuple
    xyz: tuple = ()
    D: list = field(default_factory=list)
    trace: float = float("nan")
    det: float = float("nan")
    order: int | None = None
    lambda_k: float | None = None
    lambda_ambiguous: bool = False
    index_formula: int | None = None
    winding_index: int | None = None
    hat_K: float | None = None
    isolation_radius: float = float("nan")

    def to_row(self):
        d = asdict(self)
        d["u"], d["v"] = self.uv
        d["x"], d["y"], d["z"] = self.xyz if self.xyz else (float("nan"),) * 3
        return d


@dataclass
class EigenSplit:
    lambda0: float
    lambda1: float
    v0: np.ndarray
    v1: np.ndarray


@dataclass
class OrderResult:
    k: int
    lambda_k: float
    ambiguous: bool
    radius: float = 0.0
    s: np.ndarray | None = None
    rho: np.ndarray | None = None
    hat_k1: np.ndarray | None = None
    trace: float = float("nan")

    def derivative_of(self, samples, m):
        """m-th arclength derivative at q of a quantity sampled on the v0 curve."""
        cheb = C.Chebyshev.fit(self.s, samples, deg=len(self.s) - 1, domain=[-self.radius, self.radius])
        return float(cheb.deriv(m)(0.0)) if m else float(cheb(0.0))


# ---------------------------------------------------------------- location

_STEP_MULTIPLES = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0] + [0.5 ** j for j in range(1, 21)])


def _newton(fld, u, v, tol, maxit=50):
    """Damped Newton on X = 0.

    Besides backtracking, integer multiples of the Newton step are tried:
    at a zero of multiplicity k along the kernel direction the plain step
    only shrinks the error by (k - 1)/k, while k times the step removes it.
    Iteration continues past |X| < tol while |X| keeps dropping.
    """
    p = np.array([u, v], dtype=float)

    def resid(pts):
        pts = np.atleast_2d(pts)
        out = np.full(len(pts), np.inf)
        ok = _inside(fld, pts[:, 0], pts[:, 1])
        if ok.any():
            X, _ = fld.values(pts[ok, 0], pts[ok, 1])
            r = X[0] ** 2 + X[1] ** 2
            out[ok] = np.where(np.isfinite(r), r, np.inf)
        return out

    f0 = float(resid(p)[0])
    for _ in range(maxit):
        if f0 == 0.0:
            break
        X, _, _ = fld.sample(p[0:1], p[1:2], order=1)
        F = np.array([X[0].value[0], X[1].value[0]])
        J = np.array([[X[0].partial(0)[0], X[0].partial(1)[0]],
                      [X[1].partial(0)[0], X[1].partial(1)[0]]])
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(J, F, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        r = resid(p + _STEP_MULTIPLES[:, None] * step)
        j = int(np.argmin(r))
        best, t = float(r[j]), _STEP_MULTIPLES[j]
        if not best < f0:
            break
        p = p + t * step
        f0 = best
    return p if math.sqrt(f0) < tol else None


def _wrap_delta(fld, a, b):
    d = np.asarray(a, float) - np.asarray(b, float)
    for axis in (0, 1):
        if fld.periodic[axis]:
            per = fld.chart.period(axis) if hasattr(fld, "chart") else 2 * np.pi
            d[..., axis] = (d[..., axis] + per / 2) % per - per / 2
    return d


def ring_clear(fld, q, r, threshold, samples=256):
    """True when |X| stays above `threshold` on the circle of radius r about q."""
    th = 2 * np.pi * (np.arange(samples) + 0.5) / samples
    u = q[0] + r * np.cos(th)
    v = q[1] + r * np.sin(th)
    _, nrm = fld.values(u, v)
    if nrm.min() <= threshold:
        return False
    # refine the lowest local minima with a few rounds of local zooming
    idx = np.argsort(nrm)[:4]
    for i in idx:
        lo, hi = th[i] - 2 * np.pi / samples, th[i] + 2 * np.pi / samples
        for _ in range(12):
            tt = np.linspace(lo, hi, 33)
            _, nn = fld.values(q[0] + r * np.cos(tt), q[1] + r * np.sin(tt))
            j = int(np.argmin(nn))
            if nn[j] <= threshold:
                return False
            w = (hi - lo) / 8
            lo, hi = tt[j] - w, tt[j] + w
    return True


def isolation_radius(fld, q, r_max, tol, levels=40):
    """Largest r <= r_max (on a geometric scan) whose ring keeps |X| > 10 tol."""
    r = r_max
    for _ in range(levels):
        if ring_clear(fld, q, r, 10 * tol):
            return r
        r *= 0.7
    raise NonIsolatedCharacteristicSet(
        f"no ring around {tuple(np.round(q, 12))} separates it from other zeros of X")


def locate_characteristic_points(fld, grid: int = 64, tol: float = 1e-9, xtol: float | None = None,
                                 r_max: float | None = None):
    """Zeros of X in the chart, as CharPoint seeds with isolation radii."""
    u0, u1, v0, v1 = fld.domain.bbox()
    diam = math.hypot(u1 - u0, v1 - v0)
    xtol = 1e-5 * diam if xtol is None else xtol
    uu = u0 + (u1 - u0) * (np.arange(grid) + 0.5) / grid
    vv = v0 + (v1 - v0) * (np.arange(grid) + 0.5) / grid
    U, V = np.meshgrid(uu, vv, indexing="ij")
    inside = _inside(fld, U, V)
    nrm = np.full(U.shape, np.inf)
    _, n_in = fld.values(U[inside], V[inside])
    nrm[inside] = n_in
    pad = np.pad(nrm, 1, constant_values=np.inf)
    is_min = inside.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= nrm <= pad[1 + di: 1 + di + grid, 1 + dj: 1 + dj + grid]
    roots = []
    for i, j in zip(*np.nonzero(is_min)):
        p = _newton(fld, U[i, j], V[i, j], tol)
        if p is None:
            continue
        if all(np.linalg.norm(_wrap_delta(fld, p, r)) > 2 * xtol for r in roots):
            roots.append(p)
    points = []
    cell = max((u1 - u0), (v1 - v0)) / grid
    for p in roots:
        others = [np.linalg.norm(_wrap_delta(fld, p, r)) for r in roots if r is not p]
        rm = float(fld.domain.distance_to_boundary(p[0], p[1]))
        if others:
            rm = min(rm, 0.5 * min(others))
        if r_max is not None:
            rm = min(rm, r_max)
        rm = max(rm * 0.95, cell)
        iso = isolation_radius(fld, p, rm, tol)
        points.append(CharPoint(fld.chart_id, (float(p[0]), float(p[1])),
                                tuple(float(c) for c in fld.ambient(p[0], p[1])),
                                isolation_radius=iso))
    points.sort(key=lambda c: (c.uv[0], c.uv[1]))
    return points


# ---------------------------------------------------------------- differential and eigen-split

def differential_at_zero(fld, q, tol: float = 1e-6) -> np.ndarray:
    """Jacobian of the chart coefficients of X at a zero."""
    X, _, _ = fld.sample(np.array([q[0]]), np.array([q[1]]), order=1)
    _, nrm = fld.values(np.array([q[0]]), np.array([q[1]]))
    if nrm[0] > tol:
        raise NotACharacteristicPoint(f"|X| = {nrm[0]:.3e} at {tuple(q)}")
    return np.array([[X[0].partial(0)[0], X[0].partial(1)[0]],
                     [X[1].partial(0)[0], X[1].partial(1)[0]]])


def _split_matrix(A, metric, ref=None):
    tr = A[0, 0] + A[1, 1]
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    disc = tr * tr - 4 * det
    scale = max(1.0, abs(tr))
    if disc <= (1e-3 * scale) ** 2:
        raise EigenvaluesCoalesce(f"eigenvalues of nabla X nearly coincide (disc = {disc:.3e})")
    root = math.sqrt(disc)
    la, lb = (tr - root) / 2, (tr + root) / 2
    l0, l1 = (la, lb) if abs(la) < abs(lb) else (lb, la)
    l0 = det / l1  # well conditioned small root

    def vec(lam):
        c1 = np.array([A[0, 1], lam - A[0, 0]])
        c2 = np.array([lam - A[1, 1], A[1, 0]])
        v = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
        E, F, G = metric
        n = math.sqrt(E * v[0] ** 2 + 2 * F * v[0] * v[1] + G * v[1] ** 2)
        return v / n

    v0, v1 = vec(l0), vec(l1)
    if ref is not None and v0 @ np.asarray(ref) < 0:
        v0 = -v0
    return EigenSplit(l0, l1, v0, v1)


def eigen_split(fld, p, ref=None) -> EigenSplit:
    """Eigenpairs of nabla X at p, small eigenvalue first; v0 aligned with `ref`."""
    N, metric = nabla_values(fld, np.array([p[0]]), np.array([p[1]]))
    return _split_matrix(N[0], metric[0], ref)


# ---------------------------------------------------------------- order of degeneracy

def _trace_v0_curve(fld, q, d_ref, radius, s_eval):
    """Points of the v0 integral curve through q at signed arclengths s_eval."""

    def rhs_factory(sign):
        ref = sign * d_ref

        def rhs(_, y):
            sp = eigen_split(fld, y, ref)
            if abs(sp.lambda0) > 0.5 * abs(sp.lambda1):
                raise CurveTracingFailed("eigenvalue ratio left the tracing window")
            return sp.v0
        return rhs

    out = np.empty((len(s_eval), 2))
    for sign in (1.0, -1.0):
        mask = (s_eval * sign) > 0
        targets = np.sort(np.abs(s_eval[mask]))
        if targets.size == 0:
            continue
        try:
            sol = solve_ivp(rhs_factory(sign), (0.0, radius), np.asarray(q, float), method="DOP853",
                            t_eval=targets, rtol=1e-12, atol=1e-14, max_step=radius / 2)
        except (EigenvaluesCoalesce, NotACharacteristicPoint, ValueError) as exc:
            raise CurveTracingFailed(str(exc)) from exc
        if not sol.success or sol.y.shape[1] != targets.size:
            raise CurveTracingFailed(f"v0 curve integration failed: {sol.message}")
        pts = sol.y.T
        order = np.argsort(np.abs(s_eval[mask]))
        tmp = np.empty_like(pts)
        tmp[order] = pts
        out[mask] = tmp
    zero = s_eval == 0
    out[zero] = q
    return out


def _window_guess(fld, q, d, r, levels=24):
    """Largest r * 2^-j whose straight chord along +-d keeps |lambda0/lambda1| well inside the window.

    One batched evaluation; the traced curve only departs from the chord at
    second order, and order_and_lambda still halves if the guess is too big.
    """
    radii = r * 0.5 ** np.arange(levels)
    s = np.concatenate([radii, -radii])
    pts = np.asarray(q, float)[None, :] + s[:, None] * np.asarray(d, float)[None, :]
    ok = _inside(fld, pts[:, 0], pts[:, 1])
    N, _ = nabla_values(fld, pts[:, 0], pts[:, 1])
    trs = N[:, 0, 0] + N[:, 1, 1]
    dets = N[:, 0, 0] * N[:, 1, 1] - N[:, 0, 1] * N[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(dets / trs ** 2)
    good = ok & np.isfinite(ratio) & (ratio <= 0.8 * WINDOW_RATIO)
    good = good[:levels] & good[levels:]
    # first level from which every smaller level is good too
    bad = np.flatnonzero(~good)
    if bad.size == 0:
        return float(radii[0])
    j = int(bad[-1]) + 1
    return float(radii[min(j, levels - 1)])


def order_and_lambda(fld, q, kmax: int = 7, r_max: float | None = None) -> OrderResult:
    """Order of degeneracy k and invariant Lambda^(k) at a characteristic point.

    Nondegenerate points give k = 1 with det/trace.  Otherwise rho =
    det/trace of nabla X is sampled along the v0 curve and the first
    derivative above the noise floor gives k - 1.
    """
    D = differential_at_zero(fld, q, tol=1e-5)
    tr = float(np.trace(D))
    det = float(np.linalg.det(D))
    if tr == 0.0:
        raise TraceVanishes("trace of D_q X vanishes")
    if abs(det) >= DEGENERACY_TOL * tr * tr:
        return OrderResult(1, det / tr, False, trace=tr)
    split = eigen_split(fld, q)
    d_ref = split.v0
    if r_max is None:
        r_max = 0.5
    r = min(r_max, 0.9 * float(fld.domain.distance_to_boundary(q[0], q[1])))
    r = _window_guess(fld, q, d_ref, r)
    nodes = np.cos(np.pi * (np.arange(FIT_DEGREE + 1) + 0.5) / (FIT_DEGREE + 1))
    last_error = None
    for _ in range(40):
        s = r * nodes
        try:
            pts = _trace_v0_curve(fld, q, d_ref, r, s)
            N, _ = nabla_values(fld, pts[:, 0], pts[:, 1])
        except CurveTracingFailed as exc:
            last_error = exc
            r *= 0.5
            continue
        trs = N[:, 0, 0] + N[:, 1, 1]
        dets = N[:, 0, 0] * N[:, 1, 1] - N[:, 0, 1] * N[:, 1, 0]
        lam0 = dets / trs
        if np.max(np.abs(lam0 / trs)) > WINDOW_RATIO or not np.all(_inside(fld, pts[:, 0], pts[:, 1])):
            r *= 0.5
            continue
        res = OrderResult(0, 0.0, False, r, s, dets / trs, dets / trs ** 2, trace=tr)
        rho_inf = max(1.0, float(np.max(np.abs(res.rho))))
        cheb = C.Chebyshev.fit(s, res.rho, deg=FIT_DEGREE, domain=[-r, r])
        for m in range(1, kmax):
            d_m = float(cheb.deriv(m)(0.0))
            if abs(d_m) > 1e-5 * rho_inf * math.factorial(m) / r ** m:
                res.k = m + 1
                res.ambiguous = (res.k % 2 == 0)
                res.lambda_k = abs(d_m) if res.ambiguous else d_m
                return res
        raise OrderExceedsKmax(f"all v0-derivatives of rho up to order {kmax - 1} vanish at {tuple(q)}")
    raise CurveTracingFailed(f"no admissible window for the v0 curve at {tuple(q)}: {last_error}")


def index_formula(k: int, trace: float, lambda_k: float) -> int:
    if k < 1:
        raise InvalidOrder(f"order must be >= 1, got {k}")
    if k % 2 == 0:
        return 0
    return int(np.sign(trace * lambda_k))


# ---------------------------------------------------------------- winding

def winding_index(fld, q, radius: float, samples: int = 64, max_rounds: int = 40) -> int:
    """Degree of X/|X| on a circle, by adaptive angle unwrapping."""
    if samples < 64:
        raise ValueError("need at least 64 samples")
    th = 2 * np.pi * np.arange(samples + 1) / samples

    def angles(t):
        X, nrm = fld.values(q[0] + radius * np.cos(t), q[1] + radius * np.sin(t))
        return np.arctan2(X[1], X[0]), nrm

    ang, nrm = angles(th)
    for _ in range(max_rounds):
        if np.any(nrm == 0.0) or np.any(nrm < 1e-300):
            raise AngleUnwrapFailed("X vanishes on the winding circle")
        jump = (np.diff(ang) + np.pi) % (2 * np.pi) - np.pi
        bad = np.abs(jump) >= np.pi / 4
        if not bad.any():
            total = jump.sum()
            w = total / (2 * np.pi)
            n = int(round(w))
            if abs(w - n) >= 0.05:
                raise AngleUnwrapFailed(f"winding residual {abs(w - n):.3f}")
            return n
        mids = 0.5 * (th[:-1][bad] + th[1:][bad])
        am, nm = angles(mids)
        th = np.concatenate([th, mids])
        ang = np.concatenate([ang, am])
        nrm = np.concatenate([nrm, nm])
        order = np.argsort(th, kind="stable")
        th, ang, nrm = th[order], ang[order], nrm[order]
    raise AngleUnwrapFailed("angle unwrapping did not resolve after refinement")


# ---------------------------------------------------------------- K-hat and Euler characteristic

def hat_K_matrix(N) -> float:
    tr = N[0][0] + N[1][1]
    if tr == 0:
        raise TraceVanishes("trace of nabla X vanishes")
    det = N[0][0] * N[1][1] - N[0][1] * N[1][0]
    return -1.0 + det / tr ** 2


def hat_K(fld, p) -> float:
    N, _ = nabla_values(fld, np.array([p[0]]), np.array([p[1]]))
    return hat_K_matrix(N[0])


def euler_characteristic(points):
    """(sum of winding indices, sum over odd orders of sign(trace * Lambda))."""
    if not points:
        warnings.warn("no characteristic points on a compact surface", ContactTopologyWarning)
        return 0, 0
    from_idx = 0
    from_formula = 0
    for p in points:
        if p.order is None or p.winding_index is None:
            raise UnclassifiedPoint(f"point {p.uv} in chart {p.chart_id} is not classified")
        from_idx += p.winding_index
        if p.order % 2 == 1:
            from_formula += int(np.sign(p.trace * p.lambda_k))
    return from_idx, from_formula


# ---------------------------------------------------------------- kernel-extension fixture

def lambda_gamma_fixture(fld: PlanarField, curve, order: int, tol: float = 1e-9):
    """Derivatives at t = 0 of g(X, gamma') along an explicit curve gamma(t)."""
    exprs = [parse(c, ("t",)) if isinstance(c, str) else c for c in curve]
    t = jets.variables((np.array([0.0]),), order + 1, 1)
    gam = [evaluate_on(e, {"t": t[0]}, nvars=1, order=order + 1) for e in exprs]
    q = np.array([g.value[0] for g in gam])
    vel = np.array([g.partial(0)[0] for g in gam])
    D = differential_at_zero(fld, q, tol=tol)
    if np.linalg.norm(D @ vel) > 1e-8 * max(1.0, np.linalg.norm(vel)):
        raise NotAKernelExtension(f"gamma'(0) = {vel} is not in ker D_q X")
    env = dict(zip(fld.variables, [g.truncate(order) for g in gam]))
    X = [evaluate_on(e, env, nvars=1, order=order) for e in fld.exprs]
    lam = X[0] * gam[0].d(0) + X[1] * gam[1].d(0)
    return [float(lam.derivative((j,))[0]) for j in range(order + 1)]


# ---------------------------------------------------------------- full classification

def classify(fld, point: CharPoint, kmax: int = 7) -> CharPoint:
    q = np.array(point.uv)
    D = differential_at_zero(fld, q, tol=1e-5)
    point.D = D.tolist()
    point.trace = float(np.trace(D))
    point.det = float(np.linalg.det(D))
    point.hat_K = hat_K(fld, q)
    res = order_and_lambda(fld, q, kmax=kmax, r_max=0.5 * point.isolation_radius)
    point.order = res.k
    point.lambda_k = res.lambda_k
    point.lambda_ambiguous = res.ambiguous
    point.index_formula = index_formula(res.k, point.trace, res.lambda_k)
    point.winding_index = winding_index(fld, q, 0.5 * point.isolation_radius)
    return point
