import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contactgb import Disk
from contactgb import char_points as cp
from contactgb import curvature_measures as cm
from contactgb.char_points import ChartField, PlanarField
from contactgb.errors import DivergenceOutOfRange, DivergentTail, QuadratureNotConverged
from contactgb.surface_geometry import SurfaceJets, area_density


def k_sigma_closed(r, eps):
    return -r * (r * r + 6 * eps) / (np.sqrt(eps) * (r * r + 4 * eps) ** 1.5)


def ball_closed(rho, eps):
    se = np.sqrt(eps)
    return 2 * np.pi * (-(2 * eps + rho ** 2) / (se * np.sqrt(4 * eps + rho ** 2)) + rho / se) + 2 * np.pi


def plane_points(sc):
    fld = ChartField(sc.charts[0], sc.model, 0)
    return [cp.classify(fld, p) for p in cp.locate_characteristic_points(fld)]


@pytest.mark.parametrize("div,eps,want", [(1.0, 0.3, np.sqrt(0.3)), (-1.0, 0.05, np.sqrt(0.05)),
                                          (0.0, 0.4, 1.0), (0.6, 0.25, np.sqrt(0.73))])
def test_b_eps_values(div, eps, want):
    assert cm.b_eps(div, eps) == pytest.approx(want, rel=1e-14)


def test_b_eps_rejects_large_divergence():
    with pytest.raises(DivergenceOutOfRange):
        cm.b_eps(1.2, 0.5)


@given(st.floats(-1, 1), st.floats(0, 1))
def test_b_eps_bounds(div, eps):
    b = cm.b_eps(div, eps)
    assert np.sqrt(eps) - 1e-15 <= b <= 1 + 1e-15


def test_polar_density_example(polar_chart, heis):
    dens = cm.gaussian_curvature_eps(polar_chart, heis, 1.0, (1.0, 0.5)) * area_density(polar_chart, heis, 1.0,
                                                                                         (1.0, 0.5))
    assert dens == pytest.approx(-7 / 5 ** 1.5, rel=1e-12)


@given(st.floats(0.1, 2.0), st.floats(0.01, 1.0))
def test_polar_density_closed_form(polar_chart, heis, r, eps):
    sj = SurfaceJets(polar_chart, heis, np.array([r]), np.array([0.3]), order=2)
    assert cm.k_sigma_density(sj, eps)[0] == pytest.approx(k_sigma_closed(r, eps), rel=1e-9)


def test_mu_density_polar_and_cartesian(polar_chart, plane_chart, heis):
    assert cm.mu_minus_one_density(polar_chart, heis, (0.7, 1.0)) == pytest.approx(-1.0, rel=1e-12)
    assert cm.mu_minus_one_density(plane_chart, heis, (0.3, -0.4)) == pytest.approx(-1 / 0.5, rel=1e-12)


@pytest.mark.parametrize("closed_form", [True, False])
def test_connection_form_exactness(sphere, heis, closed_form):
    # d(eta^eps) against the Brioschi density, where |X| > 0.2
    ch = sphere.charts[0]
    rng = np.random.default_rng(11)
    checked = 0
    for u, v in rng.uniform(-2, 2, (60, 2)):
        sj = SurfaceJets(ch, heis, np.array([u]), np.array([v]), order=2)
        if sj.norm2.value[0] < 0.04:
            continue
        for eps in (1.0, 0.2, 0.01):
            s = cm.connection_form_eps(ch, heis, eps, (u, v), use_closed_form=closed_form)
            ks = cm.k_sigma_density(sj, eps)[0]
            assert s.d_eta == pytest.approx(ks, rel=1e-6, abs=1e-9)
        checked += 1
    assert checked > 20


def test_coframe_routes_agree(sphere, heis):
    a = cm.connection_form_eps(sphere.charts[0], heis, 0.3, (0.8, -0.4), use_closed_form=True)
    b = cm.connection_form_eps(sphere.charts[0], heis, 0.3, (0.8, -0.4), use_closed_form=False)
    assert a.c1 == pytest.approx(b.c1, abs=1e-10) and a.c2 == pytest.approx(b.c2, abs=1e-10)


def test_scaled_eta_tends_to_alpha(sphere, heis):
    uv = (0.9, 0.5)
    eps = 1e-8
    eta = cm.connection_form_eps(sphere.charts[0], heis, eps, uv).eta_eps
    assert np.max(np.abs(np.sqrt(eps) * eta - cm.alpha_value(sphere.charts[0], heis, uv))) < 1e-6


def test_zero_test_function_gives_zero(plane_scenario):
    sc = plane_scenario
    phi = cm.make_test_function("0")
    val, err = cm.integrate_measure(sc.charts, sc.model, "difference", 0.1, phi, plane_points(sc))
    assert val == 0.0


def test_ball_pairing_matches_closed_form(plane_scenario):
    sc = plane_scenario
    phi = cm.make_test_function("1", support=Disk(0, 0, 1))
    val, err = cm.integrate_measure(sc.charts, sc.model, "difference", 0.01, phi, plane_points(sc))
    assert abs(val - ball_closed(1.0, 0.01)) < max(err, 1e-6)


def test_vanishing_test_function_pairs_to_zero_in_limit(plane_scenario):
    sc = plane_scenario
    phi = cm.make_test_function("(u^2 + v^2)*exp(-(u^2 + v^2))", support=Disk(0, 0, 2.4))
    pts = plane_points(sc)
    rows = cm.convergence_table(sc.charts, sc.model, pts, phi, [1e-2, 1e-3, 1e-4])
    assert [r.target for r in rows] == [0.0] * 3
    errs = [abs(r.integral) for r in rows]
    assert errs[2] < errs[1] < errs[0]


def test_gauss_bonnet_half(sphere):
    val, err = cm.integrate_measure(sphere.charts, sphere.model, "K_eps_sigma_eps", 0.5, None,
                                    _sphere_points(sphere))
    assert abs(val - 4 * np.pi) < 1e-3


def _sphere_points(sc):
    out = []
    for cid, ch in enumerate(sc.charts):
        fld = ChartField(ch, sc.model, cid)
        out += [cp.classify(fld, p) for p in cp.locate_characteristic_points(fld)]
    # the scenario runner dedupes across charts; both poles are seen from both charts here
    return [p for p in out if np.hypot(*p.uv) < 1.0]


def test_unreachable_tolerance_raises(plane_scenario):
    sc = plane_scenario
    phi = cm.make_test_function("1", support=Disk(0, 0, 1))
    integ = cm.Integrator(sc.charts, sc.model, plane_points(sc), phi, cm.QuadSpec(angular=8, radial=8))
    with pytest.raises(QuadratureNotConverged):
        integ.integrate("difference", 1e-4, tol=1e-12)


def test_probe_plane_and_k3(plane_chart, heis):
    res = cm.inv_norm_integrability_probe(ChartField(plane_chart, heis, 0), np.zeros(2))
    assert res.tail < 1e-3
    res3 = cm.inv_norm_integrability_probe(PlanarField("x", "y^3"), np.zeros(2))
    assert res3.tail < 1e-3
    assert np.all(np.diff(res3.cumulative) >= 0)


def test_probe_line_of_zeros_diverges():
    with pytest.raises(DivergentTail):
        cm.inv_norm_integrability_probe(PlanarField("x*y", "y"), np.zeros(2))


def test_density_grid_rows(plane_chart, heis):
    rows = cm.density_grid(plane_chart, heis, "mu_minus_one", n=11)
    rows = np.asarray(rows)
    assert rows.ndim == 2 and rows.shape[1] == 3 and len(rows) > 50
    u, v, d = rows.T
    assert np.allclose(d, -1 / np.hypot(u, v), rtol=1e-10)
