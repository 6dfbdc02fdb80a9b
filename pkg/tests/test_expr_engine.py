import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contactgb.errors import (DomainError, ExprSyntaxError, NonSmoothPrimitive, OrderUnsupported,
                              UnknownIdentifier)
from contactgb.expr_engine import CATALOG, eval_jet, finite_diff_check, finite_diff_estimate, parse, to_source

XYZ = ("x", "y", "z")


def test_sum_of_squares_shape():
    root = parse("x^2 + y^2", ["x", "y"]).root
    assert root.kind == "binop" and root.op == "+"
    assert [c.kind for c in root.children] == ["powi", "powi"]


def test_unbalanced_call_position():
    with pytest.raises(ExprSyntaxError) as err:
        parse("sin(", ["x"])
    assert err.value.position == 4


def test_defining_function_parses():
    e = parse("z - (x*y)/2", XYZ)
    assert np.isclose(eval_jet(e, (1.0, 2.0, 3.0), 0).value, 2.0)


@pytest.mark.parametrize("src", ["abs(x)", "sign(x)", "floor(x)"])
def test_non_smooth_rejected(src):
    with pytest.raises(NonSmoothPrimitive):
        parse(src, ["x"])


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        parse("x + w", ["x"])


@pytest.mark.parametrize("src", ["x +", "(x", "x $ y", "2 x"])
def test_malformed(src):
    with pytest.raises(ExprSyntaxError):
        parse(src, ["x", "y"])


def test_square_jet():
    j = eval_jet(parse("x^2", ["x"]), (3.0,), 2)
    assert (j.value, j.partial(0), j.partial(0, 0)) == (9.0, 6.0, 2.0)


def test_sine_taylor():
    j = eval_jet(parse("sin(x)", ["x"]), (0.0,), 3)
    assert [j.derivative((n,)) for n in range(4)] == pytest.approx([0, 1, 0, -1], abs=1e-15)


def test_exp_mixed_partial():
    j = eval_jet(parse("exp(x*y)", ["x", "y"]), (1.0, 1.0), 2)
    assert j.partial(0, 1) == pytest.approx(2 * math.e, rel=1e-14)


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_jet(parse("log(x)", ["x"]), (-1.0,), 1)
    with pytest.raises(DomainError):
        eval_jet(parse("sqrt(x)", ["x"]), (0.0,), 1)
    with pytest.raises(DomainError):
        eval_jet(parse("x^0.5", ["x"]), (-2.0,), 0)


def test_order_cap():
    with pytest.raises(OrderUnsupported):
        eval_jet(parse("x", ["x"]), (0.0,), 4)


def test_fd_examples():
    assert finite_diff_check(parse("x^3", ["x"]), (2.0,), 2, 1e-4) < 1e-6
    assert finite_diff_check(parse("sin(x)*cos(y)", ["x", "y"]), (0.3, 0.7), 2, 1e-4) < 1e-6
    assert finite_diff_check(parse("1", ["x", "y"]), (0.1, 5.0), 3, 1e-3) == 0.0


def _richardson(e, p, alpha, h):
    return (4 * finite_diff_estimate(e, p, alpha, h / 2) - finite_diff_estimate(e, p, alpha, h)) / 3


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_jets_agree_with_differences(name):
    # relative tolerance 1e-5 at 100 random points, against extrapolated central differences
    e = parse(CATALOG[name], XYZ)
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.3, 0.9, size=(100, 3))
    steps = {1: 1e-3, 2: 2e-3, 3: 4e-3}
    worst = 0.0
    for p in pts:
        for alpha, exact in eval_jet(e, p, 3).derivatives().items():
            if sum(alpha) == 0:
                continue
            approx = _richardson(e, p, alpha, steps[sum(alpha)])
            worst = max(worst, abs(float(exact) - approx) / max(1.0, abs(float(exact))))
    assert worst < 1e-5


idents = st.sampled_from(["x", "y", "z", "2", "0.5", "1e-3"])
ops = st.sampled_from(["+", "-", "*", "/"])


@st.composite
def sources(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(idents)
    kind = draw(st.sampled_from(["bin", "call", "pow", "neg"]))
    if kind == "bin":
        return f"({draw(sources(depth=depth - 1))} {draw(ops)} {draw(sources(depth=depth - 1))})"
    if kind == "call":
        return f"{draw(st.sampled_from(['sin', 'cos', 'atan', 'exp']))}({draw(sources(depth=depth - 1))})"
    if kind == "pow":
        return f"({draw(sources(depth=depth - 1))})^{draw(st.integers(0, 3))}"
    return f"-{draw(sources(depth=depth - 1))}"


@given(sources())
def test_print_parse_round_trip(src):
    e = parse(src, XYZ)
    again = parse(to_source(e.root), XYZ)
    assert again.root == e.root
