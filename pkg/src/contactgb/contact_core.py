"""Contact sub-Riemannian chart: contact form, horizontal frame, Reeb field, g^eps."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import jets
from .errors import (ContactDegenerate, ModelInvariantError, OrientationError,
                     SingularSystem, UnknownModel)
from .expr_engine import Expression, evaluate_on, parse

AMBIENT = ("x", "y", "z")
IDENTITY_SCALE_TOL = 1e-13


@dataclass(frozen=True)
class ContactModel:
    """Contact form coefficients and an orthonormal horizontal frame.

    `omega`, `f1`, `f2` are triples of expressions in (x, y, z).  When
    `rescaled` is set the effective contact form is omega / domega(f1, f2),
    applied at jet level.
    """

    omega: tuple
    f1: tuple
    f2: tuple
    domain: tuple = ((-3.0, 3.0), (-3.0, 3.0), (-3.0, 3.0))
    name: str = "inline"
    rescaled: bool = False
    normalized: bool = False


def make_model(omega, f1, f2, domain=None, name="inline") -> ContactModel:
    """Build a model from expression strings."""
    def p(triple):
        if len(triple) != 3:
            raise ValueError("expected three component expressions")
        return tuple(parse(s, AMBIENT) if isinstance(s, str) else s for s in triple)

    domain = tuple(tuple(map(float, d)) for d in domain) if domain else ContactModel.domain
    return ContactModel(p(omega), p(f1), p(f2), domain, name)


_CATALOG = {
    "heisenberg": dict(
        omega=("-y/2", "x/2", "1"),
        f1=("1", "0", "y/2"),
        f2=("0", "1", "-x/2"),
    ),
}


def builtin_model(name: str) -> ContactModel:
    """Catalog model, already normalized."""
    if name not in _CATALOG:
        raise UnknownModel(f"no built-in model named {name!r}")
    spec = _CATALOG[name]
    return normalize(make_model(spec["omega"], spec["f1"], spec["f2"], name=name))


# ---------------------------------------------------------------- jets

def _field_jets(exprs, pts, order):
    env = dict(zip(AMBIENT, jets.variables(pts, order, 3)))
    return [evaluate_on(e, env, nvars=3, order=order) for e in exprs]


def _pairing(form, vec):
    return form[0] * vec[0] + form[1] * vec[1] + form[2] * vec[2]


def curl(form):
    """Vector V with domega(a, b) = V . (a x b), from jets of a 1-form."""
    wx, wy, wz = form
    return [wz.d(1) - wy.d(2), wx.d(2) - wz.d(0), wy.d(0) - wx.d(1)]


def _cross(a, b):
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def _domega_pair(V, a, b):
    return _pairing(V, _cross(a, b))


def raw_scale_jet(model, pts, order):
    """Jet of 1/domega(f1, f2) for the model's raw contact form."""
    omega = _field_jets(model.omega, pts, order + 1)
    f1 = _field_jets(model.f1, pts, order)
    f2 = _field_jets(model.f2, pts, order)
    return jets.reciprocal(_domega_pair(curl(omega), f1, f2))


def omega_jets(model: ContactModel, pts, order: int):
    """Jets of the effective contact form coefficients at ambient points."""
    if not model.rescaled:
        return _field_jets(model.omega, pts, order)
    raw = _field_jets(model.omega, pts, order)
    scale = raw_scale_jet(model, pts, order)
    return [scale * w for w in raw]


class ModelJets:
    """Frame, Reeb field and dual coframe as ambient jets of a given order.

    Batched over arrays of ambient points.  The contact form is carried
    one order higher so that its differential reaches `order`.
    """

    def __init__(self, model: ContactModel, pts, order: int = 2):
        pts = [np.asarray(p, dtype=float) for p in pts]
        self.order = order
        self.omega_hi = omega_jets(model, pts, order + 1)
        self.omega = [w.truncate(order) for w in self.omega_hi]
        self.V = curl(self.omega_hi)
        self.f1 = _field_jets(model.f1, pts, order)
        self.f2 = _field_jets(model.f2, pts, order)
        wv = _pairing(self.omega, self.V)
        if np.any(np.abs(wv.value) < 1e-14):
            raise SingularSystem("contact condition fails: omega(curl omega) = 0")
        inv = jets.reciprocal(wv)
        self.f0 = [v * inv for v in self.V]
        det = _pairing(self.f1, _cross(self.f2, self.f0))
        if np.any(np.abs(det.value) < 1e-14):
            raise SingularSystem("frame (f1, f2, f0) is degenerate")
        idet = jets.reciprocal(det)
        self.nu1 = [c * idet for c in _cross(self.f2, self.f0)]
        self.nu2 = [c * idet for c in _cross(self.f0, self.f1)]


# ---------------------------------------------------------------- pointwise API

def _values(model, point):
    pts = [np.asarray(float(c)) for c in point]
    omega = omega_jets(model, pts, 1)
    f1 = [j.value for j in _field_jets(model.f1, pts, 0)]
    f2 = [j.value for j in _field_jets(model.f2, pts, 0)]
    w = np.array([float(j.value) for j in omega])
    dw = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            dw[i, j] = float(omega[j].partial(i) - omega[i].partial(j))
    return w, dw, np.array(f1, dtype=float), np.array(f2, dtype=float)


def domega_value(model, point, a, b) -> float:
    _, dw, _, _ = _values(model, point)
    return float(np.asarray(a) @ dw @ np.asarray(b))


def normalization_scale(model: ContactModel, point) -> float:
    """1/domega(f1, f2) at a point; equals 1 for a normalized model."""
    _, dw, f1, f2 = _values(model, point)
    val = f1 @ dw @ f2
    if val == 0.0:
        raise ContactDegenerate(f"domega(f1, f2) = 0 at {tuple(point)}")
    return 1.0 / float(val)


def reeb_field(model: ContactModel, point, basis=None) -> np.ndarray:
    """Solve omega(f0) = 1, domega(f0, b1) = domega(f0, b2) = 0.

    `basis` supplies the completion vectors (b1, b2); by default the
    horizontal frame is used.
    """
    w, dw, f1, f2 = _values(model, point)
    b1, b2 = (f1, f2) if basis is None else (np.asarray(basis[0], float), np.asarray(basis[1], float))
    # domega(f0, b) = f0 . (dw @ b)
    A = np.array([w, dw @ b1, dw @ b2])
    if abs(np.linalg.det(A)) < 1e-13:
        raise SingularSystem(f"Reeb system singular at {tuple(point)}")
    return np.linalg.solve(A, np.array([1.0, 0.0, 0.0]))


def frame_at(model, point):
    """Columns f1, f2, f0 at a point."""
    _, _, f1, f2 = _values(model, point)
    return np.column_stack([f1, f2, reeb_field(model, point)])


def metric_eps(model: ContactModel, eps: float, point, v, w) -> float:
    """g^eps(v, w): horizontal part from the frame, vertical part weighted 1/eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    M = frame_at(model, point)
    if abs(np.linalg.det(M)) < 1e-13:
        raise SingularSystem(f"frame degenerate at {tuple(point)}")
    cv = np.linalg.solve(M, np.asarray(v, dtype=float))
    cw = np.linalg.solve(M, np.asarray(w, dtype=float))
    return float(cv[0] * cw[0] + cv[1] * cw[1] + cv[2] * cw[2] / eps)


# ---------------------------------------------------------------- validation

def validation_points(domain, seed: int = 0, grid: int = 11, random: int = 1000):
    axes = [np.linspace(lo, hi, grid) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    structured = [m.ravel() for m in mesh]
    rng = np.random.default_rng(seed)
    rand = [rng.uniform(lo, hi, random) for lo, hi in domain]
    return [np.concatenate([s, r]) for s, r in zip(structured, rand)]


def _raw_domega_f1f2(model, pts):
    omega = _field_jets(model.omega, pts, 1)
    f1 = _field_jets(model.f1, pts, 0)
    f2 = _field_jets(model.f2, pts, 0)
    V = curl(omega)
    return sum(V[i].value * _cross([f.value for f in f1], [f.value for f in f2])[i] for i in range(3))


def check_invariants(model: ContactModel, seed: int = 0, tol: float = 1e-10) -> dict:
    """Evaluate the model invariants on the validation grid."""
    pts = validation_points(model.domain, seed)
    mj = ModelJets(model, pts, order=0)
    h1 = np.abs(_pairing([w.value for w in mj.omega], [f.value for f in mj.f1]))
    h2 = np.abs(_pairing([w.value for w in mj.omega], [f.value for f in mj.f2]))
    norm = np.abs(_domega_pair([v.value for v in mj.V], [f.value for f in mj.f1],
                               [f.value for f in mj.f2]) - 1.0)
    contact = np.abs(_pairing([w.value for w in mj.omega], [v.value for v in mj.V]))
    return {
        "horizontal_f1": float(h1.max()),
        "horizontal_f2": float(h2.max()),
        "normalization": float(norm.max()),
        "contact_min": float(contact.min()),
        "ok": bool(h1.max() < tol and h2.max() < tol and norm.max() < tol and contact.min() > tol),
    }


def normalize(model: ContactModel, seed: int = 0) -> ContactModel:
    """Rescale the contact form so that domega(f1, f2) = 1."""
    if model.normalized:
        return model
    pts = validation_points(model.domain, seed)
    env = dict(zip(AMBIENT, pts))
    for which, frame in (("f1", model.f1), ("f2", model.f2)):
        val = sum(np.asarray(evaluate_on(w, env), float) * np.asarray(evaluate_on(f, env), float)
                  for w, f in zip(model.omega, frame))
        if np.max(np.abs(val)) > 1e-10:
            raise ModelInvariantError(f"omega({which}) != 0 on the validation grid")
    vals = np.asarray(_raw_domega_f1f2(model, pts), dtype=float) * np.ones(len(pts[0]))
    if np.any(np.abs(vals) < 1e-12) or (vals.min() < 0 < vals.max()):
        raise ContactDegenerate("domega(f1, f2) vanishes on the validation grid")
    if vals.max() < 0:
        raise OrientationError("domega(f1, f2) < 0: frame (f1, f2) is negatively oriented")
    rescale = bool(np.max(np.abs(vals - 1.0)) > IDENTITY_SCALE_TOL)
    return replace(model, rescaled=rescale, normalized=True)
