"""Scalar-field expression language: parser, printer and jet evaluator.

Grammar (precedence low to high)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

`^` with a constant integer exponent stays an integer power; any other
exponent is rewritten as exp(b*log(a)), which requires a positive base.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import (DomainError, ExprSyntaxError, NonSmoothPrimitive,
                     OrderUnsupported, UnknownIdentifier)
from .jets import Jet

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "atan")
NON_SMOOTH = ("abs", "sign", "floor", "ceil", "round", "min", "max")
CONSTANTS = {"pi": math.pi}
MAX_JET_ORDER = 3

_APPLY = {
    "sin": jets.sin,
    "cos": jets.cos,
    "exp": jets.exp,
    "log": jets.log,
    "sqrt": jets.sqrt,
    "atan": jets.atan,
}


@dataclass(frozen=True)
class ExprNode:
    """One node of an expression tree.

    kind is one of const, var, neg, binop, powi, call.  `op` holds the
    operator symbol, function name or variable name; `value` holds the
    constant or the integer exponent.
    """

    kind: str
    op: str = ""
    value: float = 0.0
    children: tuple = ()
    note: str = field(default="", compare=False)


@dataclass(frozen=True)
class Expression:
    """A validated tree together with its declared variable list."""

    root: ExprNode
    variables: tuple
    source: str = field(default="", compare=False)

    def __str__(self):
        return to_source(self.root)


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, variables):
        self.source = source
        self.variables = tuple(variables)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.peek()
        if val != text or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"found {found}", pos, expected=[repr(text)])
        self.take()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos, expected=["operator", "end of input"])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ExprNode("binop", op, children=(node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ExprNode("binop", op, children=(node, self.unary()))
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return ExprNode("neg", children=(self.unary(),))
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            exponent = self.unary()
            n = _integer_constant(exponent)
            if n is not None:
                return ExprNode("powi", value=n, children=(base,))
            log_base = ExprNode("call", "log", children=(base,))
            return ExprNode(
                "call", "exp",
                children=(ExprNode("binop", "*", children=(exponent, log_base)),),
                note="non-integer power: base must be positive",
            )
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ExprNode("const", value=float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val in NON_SMOOTH:
                    raise NonSmoothPrimitive(f"{val} is not smooth (position {pos})")
                if val not in FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {val!r} at position {pos}")
                self.take()
                arg = self.expr()
                self.expect(")")
                return ExprNode("call", val, children=(arg,))
            if val in NON_SMOOTH:
                raise NonSmoothPrimitive(f"{val} is not smooth (position {pos})")
            if val in self.variables:
                return ExprNode("var", val)
            if val in CONSTANTS:
                return ExprNode("const", value=CONSTANTS[val])
            raise UnknownIdentifier(f"unknown identifier {val!r} at position {pos}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"found {found}", pos, expected=["number", "name", "'('", "'-'"])


def _integer_constant(node):
    sign = 1
    while node.kind == "neg":
        sign = -sign
        node = node.children[0]
    if node.kind == "const" and float(node.value).is_integer():
        return sign * int(node.value)
    return None


def parse(source: str, variables) -> Expression:
    """Parse `source` into a validated expression over `variables`."""
    variables = tuple(variables)
    if len(set(variables)) != len(variables):
        raise ValueError("variable names must be distinct")
    root = _Parser(source, variables).parse()
    return Expression(root, variables, source)


# ---------------------------------------------------------------- printer

def to_source(node: ExprNode) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    k = node.kind
    if k == "const":
        return repr(float(node.value))
    if k == "var":
        return node.op
    if k == "neg":
        return f"(-{to_source(node.children[0])})"
    if k == "binop":
        a, b = node.children
        return f"({to_source(a)} {node.op} {to_source(b)})"
    if k == "powi":
        return f"({to_source(node.children[0])})^{int(node.value)}"
    if k == "call":
        return f"{node.op}({to_source(node.children[0])})"
    raise ValueError(f"bad node kind {k}")


# ---------------------------------------------------------------- evaluation

def evaluate(node: ExprNode, env):
    """Evaluate a tree with variables bound to floats, arrays or jets."""
    k = node.kind
    if k == "const":
        return node.value
    if k == "var":
        return env[node.op]
    if k == "neg":
        return -evaluate(node.children[0], env)
    if k == "binop":
        a = evaluate(node.children[0], env)
        b = evaluate(node.children[1], env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if isinstance(b, Jet):
            return a * jets.reciprocal(b)
        b = np.asarray(b, dtype=float)
        if np.any(b == 0.0):
            raise DomainError("division by zero")
        return a / b
    if k == "powi":
        return jets.int_power(evaluate(node.children[0], env), int(node.value))
    if k == "call":
        return _APPLY[node.op](evaluate(node.children[0], env))
    raise ValueError(f"bad node kind {k}")


def evaluate_on(expr: Expression, env, nvars=None, order=0):
    """Evaluate with an env; constant results are promoted to jets if needed."""
    out = evaluate(expr.root, env)
    if nvars is not None and not isinstance(out, Jet):
        sample = next((v for v in env.values() if isinstance(v, Jet)), None)
        shape = sample.batch_shape if sample is not None else np.shape(out)
        out = Jet.constant(np.broadcast_to(np.asarray(out, dtype=float), shape), nvars, order)
    return out


def eval_jet(expr: Expression, point, order: int = 1) -> Jet:
    """All partial derivatives of `expr` up to `order` at `point`.

    Axes of the returned jet follow `expr.variables`.  The point may hold
    arrays, in which case the jet is batched over them.
    """
    if order > MAX_JET_ORDER or order < 0:
        raise OrderUnsupported(f"jet order {order} not in 0..{MAX_JET_ORDER}")
    point = np.atleast_1d(np.asarray(point, dtype=float)) if np.ndim(point) <= 1 else point
    if len(point) != len(expr.variables):
        raise ValueError(f"point has {len(point)} coordinates, expected {len(expr.variables)}")
    return taylor(expr, point, order)


def taylor(expr: Expression, point, order: int) -> Jet:
    """Uncapped jet evaluation, used internally for 1D curve expansions."""
    nv = len(expr.variables)
    coords = [np.asarray(p, dtype=float) for p in point]
    env = dict(zip(expr.variables, jets.variables(coords, order, nv)))
    return evaluate_on(expr, env, nvars=nv, order=order)


# ---------------------------------------------------------------- FD check

_STENCILS = {
    0: ((0, 1.0),),
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)),
}


def finite_diff_estimate(expr: Expression, point, alpha, step: float) -> float:
    """Central-difference estimate of the alpha-th partial derivative."""
    point = np.asarray(point, dtype=float)
    total = 0.0
    for combo in itertools.product(*(_STENCILS[a] for a in alpha)):
        shift = np.array([s for s, _ in combo], dtype=float)
        weight = math.prod(w for _, w in combo)
        env = dict(zip(expr.variables, point + step * shift))
        total += weight * float(evaluate(expr.root, env))
    return total / step ** sum(alpha)


def finite_diff_check(expr: Expression, point, order: int, step: float) -> float:
    """Max |jet derivative - central difference| over all multi-indices."""
    if step <= 0:
        raise ValueError("step must be positive")
    jet = eval_jet(expr, point, order)
    worst = 0.0
    for alpha, exact in jet.derivatives().items():
        approx = finite_diff_estimate(expr, point, alpha, step)
        worst = max(worst, abs(float(exact) - approx))
    return worst


# Smooth fields on a shared (x, y, z) chart used by the derivative property tests.
CATALOG = {
    "heisenberg_plane": "z - (x*y)/2",
    "heisenberg_omega_x": "-y/2",
    "perturbed_omega_y": "(1 + x^2)*x/2",
    "sphere": "x^2 + y^2 + z^2 - 1",
    "gaussian": "exp(-(x^2 + y^2))*cos(z)",
    "rational": "1/(2 + x^2 + y*z)",
    "log_radius": "log(1 + x^2 + y^2 + z^2)",
    "root": "sqrt(3 + x*y + z^2)",
    "arctangent": "atan(x - y*z)",
    "mixed_trig": "sin(x)*cos(y) + sin(y*z)",
    "real_power": "(2 + x^2)^1.5 - z^-2",
}
