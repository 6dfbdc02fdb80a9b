import math
import warnings

import numpy as np
import pytest

from contactgb import Box, make_chart
from contactgb import char_points as cp
from contactgb.char_points import ChartField, PlanarField
from contactgb.errors import (ContactTopologyWarning, NonIsolatedCharacteristicSet, NotACharacteristicPoint,
                              NotAKernelExtension, UnclassifiedPoint)


def normal_form(nu, mu, k):
    return PlanarField(f"{nu}*x", f"({mu}/{math.factorial(k)})*y^{k}")


def classified(fld):
    pts = cp.locate_characteristic_points(fld)
    return [cp.classify(fld, p) for p in pts]


def test_plane_has_single_point_at_origin(plane_chart, heis):
    pts = classified(ChartField(plane_chart, heis, 0))
    assert len(pts) == 1
    p = pts[0]
    assert np.allclose(p.uv, 0, atol=1e-12)
    assert abs(p.trace) == pytest.approx(1.0, abs=1e-9)
    assert p.order == 1 and p.winding_index == p.index_formula == 1
    assert p.hat_K + 1 == pytest.approx(p.det / p.trace ** 2, abs=1e-12)


def test_sphere_poles(sphere, heis):
    found = []
    for cid, ch in enumerate(sphere.charts):
        found += classified(ChartField(ch, heis, cid))
    poles = sorted(round(p.xyz[2]) for p in found)
    assert poles == [-1, 1]
    for p in found:
        assert np.allclose(p.xyz[:2], 0, atol=1e-10)
        assert p.winding_index == 1
    assert cp.euler_characteristic(found) == (2, 2)


def test_graph_over_box_has_no_points(heis):
    chart = make_chart(("u", "v", "u"), Box(-1, 1, -1, 1))
    assert cp.locate_characteristic_points(ChartField(chart, heis, 0)) == []


def test_differential_of_normal_form():
    D = cp.differential_at_zero(PlanarField("x", "y^3"), np.zeros(2))
    assert np.allclose(D, [[1, 0], [0, 0]], atol=1e-12)


def test_differential_requires_zero():
    with pytest.raises(NotACharacteristicPoint):
        cp.differential_at_zero(PlanarField("x", "y^3"), np.array([0.3, 0.0]))


def test_eigen_split_along_kernel_direction():
    fld = PlanarField("x", "y^3")
    t = 0.2
    s = cp.eigen_split(fld, np.array([0.0, t]))
    assert s.lambda0 == pytest.approx(3 * t * t, rel=1e-12)
    assert s.lambda1 == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(np.abs(s.v0), (0, 1), atol=1e-12)
    at_q = cp.eigen_split(fld, np.zeros(2))
    assert at_q.lambda0 == pytest.approx(0.0, abs=1e-14) and at_q.lambda1 == pytest.approx(1.0)


@pytest.mark.parametrize("xv,k,lam,amb", [("y^3", 3, 6.0, False), ("y^2", 2, 2.0, True), ("-y", 1, -2.0, False)])
def test_order_and_lambda_examples(xv, k, lam, amb):
    xu = "2*x" if xv == "-y" else "x"
    res = cp.order_and_lambda(PlanarField(xu, xv), np.zeros(2))
    assert res.k == k and res.ambiguous == amb
    assert abs(res.lambda_k) == pytest.approx(abs(lam), rel=1e-6)
    if not amb:
        assert res.lambda_k == pytest.approx(lam, rel=1e-6)


@pytest.mark.parametrize("k,tr,lam,want", [(1, 1, 1, 1), (2, 1, 5, 0), (2, -1, -3, 0), (3, 1, -6, -1), (5, -1, -2, 1)])
def test_index_formula(k, tr, lam, want):
    assert cp.index_formula(k, tr, lam) == want


@pytest.mark.parametrize("xu,xv,want", [("x", "y", 1), ("x", "y^2", 0), ("x", "-y^3", -1), ("-x", "y", -1)])
def test_winding_index(xu, xv, want):
    assert cp.winding_index(PlanarField(xu, xv), np.zeros(2), 0.5) == want


def test_hat_K_values():
    assert cp.hat_K_matrix(np.eye(2)) == pytest.approx(-0.75)
    assert cp.hat_K_matrix(np.diag([1.0, 0.0])) == pytest.approx(-1.0)
    fld = PlanarField("x", "y^3")
    t = 0.1
    assert cp.hat_K(fld, np.array([0.0, t])) + 1 == pytest.approx(3 * t * t / (1 + 3 * t * t) ** 2, rel=1e-10)


def test_hat_K_second_kernel_derivative():
    # v0 derivatives of hat_K + 1 along x = 0 recover trace * Lambda at k = 3
    fld = PlanarField("x", "y^3")
    h = 1e-3
    vals = [cp.hat_K(fld, np.array([0.0, s * h])) + 1 for s in (-1, 0, 1)]
    assert (vals[0] - 2 * vals[1] + vals[2]) / h ** 2 == pytest.approx(6.0, rel=1e-4)


def test_lambda_gamma_along_kernel():
    assert cp.lambda_gamma_fixture(PlanarField("x", "y^3"), ["0", "t"], 3) == pytest.approx([0, 0, 0, 6], abs=1e-12)
    d = cp.lambda_gamma_fixture(PlanarField("x", "y^3 + 0.7*y^5"), ["0", "t"], 5)
    assert d == pytest.approx([0, 0, 0, 6, 0, 120 * 0.7], abs=1e-9)


def test_lambda_gamma_rejects_transverse_curve():
    with pytest.raises(NotAKernelExtension):
        cp.lambda_gamma_fixture(PlanarField("x", "y^3"), ["t", "0"], 3)


def test_line_of_zeros_not_isolated():
    with pytest.raises(NonIsolatedCharacteristicSet):
        cp.locate_characteristic_points(PlanarField("x*y", "y"))


def test_euler_edge_cases():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert cp.euler_characteristic([]) == (0, 0)
    assert any(issubclass(w.category, ContactTopologyWarning) for w in caught)
    with pytest.raises(UnclassifiedPoint):
        cp.euler_characteristic([cp.CharPoint(0, (0.0, 0.0), (0.0, 0.0, 0.0))])


def test_duplicate_zeros_merged():
    pts = cp.locate_characteristic_points(normal_form(1, 6, 3), grid=96)
    assert len(pts) == 1 and np.allclose(pts[0].uv, 0, atol=1e-6)
