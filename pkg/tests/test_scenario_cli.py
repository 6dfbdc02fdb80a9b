import copy
import json
import os

import numpy as np
import pytest

from contactgb.cli import main
from contactgb.errors import IoError, ParseError, StageDependencyError, ValidationError
from contactgb.scenario import emit, load_scenario, run, scenario_from_tree

from conftest import scenario_path

PLANE = {
    "name": "inline_plane",
    "manifold": {"omega": ["-y/2", "x/2", "1"], "f1": ["1", "0", "y/2"], "f2": ["0", "1", "-x/2"]},
    "surface": {"compact": False,
                "charts": [{"immersion": ["u", "v", "0"], "domain": {"disk": [0, 0, 1.5]}}]},
    "epsilons": [0.25, 0.0625],
    "phis": [{"expr": "1", "support": {"disk": [0, 0, 1]}}],
}


def test_shipped_plane_loads():
    sc = load_scenario(scenario_path("heisenberg_plane.scn"))
    assert len(sc.charts) == 1 and len(sc.epsilons) == 9 and len(sc.phis) == 2
    assert sc.epsilons[0] == 1.0 and sc.epsilons[-1] == pytest.approx(4.0 ** -8)


def test_missing_f2():
    tree = copy.deepcopy(PLANE)
    del tree["manifold"]["f2"]
    with pytest.raises(ValidationError) as err:
        scenario_from_tree(tree)
    assert str(err.value) == "manifold.f2 required"


def test_zero_epsilon():
    tree = dict(PLANE, epsilons=[0.5, 0.0])
    with pytest.raises(ValidationError) as err:
        scenario_from_tree(tree)
    assert str(err.value) == "epsilon must be positive"


def test_bad_json_reports_position(tmp_path):
    p = tmp_path / "bad.scn"
    p.write_text('{\n  "name": "x",\n  "manifold" "heisenberg"\n}\n')
    with pytest.raises(ParseError) as err:
        load_scenario(p)
    assert err.value.line == 3


def test_stage_dependencies():
    sc = scenario_from_tree(PLANE)
    with pytest.raises(StageDependencyError):
        run(sc, ["converge"])
    fixture = load_scenario(scenario_path("normal_form_k2.scn"))
    with pytest.raises(StageDependencyError):
        run(fixture, ["classify", "converge"])


def test_invariants_only_has_no_tables():
    rep = run(scenario_from_tree(PLANE), ["invariants"])
    assert rep.convergence == [] and rep.points == []
    assert rep.invariants and rep.passed


def test_inline_plane_full_run(tmp_path):
    rep = run(scenario_from_tree(PLANE))
    assert len(rep.points) == 1 and rep.points[0].winding_index == 1
    rows = rep.convergence[0]["rows"]
    assert [r.epsilon for r in rows] == [0.25, 0.0625]
    assert abs(rows[1].integral - rows[1].target) < abs(rows[0].integral - rows[0].target)
    assert rep.passed
    names = [os.path.basename(f) for f in emit(rep, tmp_path / "a")]
    assert sorted(names) == ["charpoints.csv", "convergence_0.csv", "invariants.json", "report.json"]


def test_rerun_is_bit_identical(tmp_path):
    sc = load_scenario(scenario_path("normal_form_k3.scn"))
    a = emit(run(sc), tmp_path / "a")
    b = emit(run(sc), tmp_path / "b")
    for fa, fb in zip(sorted(a), sorted(b)):
        assert open(fa, "rb").read() == open(fb, "rb").read()


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rep = run(load_scenario(scenario_path("normal_form_k2.scn")))
    with pytest.raises(IoError) as err:
        emit(rep, blocker / "sub")
    assert str(blocker) in str(err.value)


@pytest.mark.parametrize("name,k,mu", [("normal_form_k2", 2, 6.0), ("normal_form_k3", 3, -6.0),
                                       ("normal_form_k5", 5, 2.0)])
def test_fixture_scenarios(name, k, mu):
    rep = run(load_scenario(scenario_path(f"{name}.scn")))
    assert rep.passed, [c for c in rep.invariants if not c["passed"]]
    (p,) = rep.points
    assert p.order == k
    assert abs(p.lambda_k) == pytest.approx(abs(mu), rel=1e-4)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", scenario_path("normal_form_k3.scn"), "--out", str(tmp_path / "k3")]) == 0
    report = json.loads((tmp_path / "k3" / "report.json").read_text())
    assert report["points"][0]["order"] == 3
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["run", scenario_path("normal_form_k3.scn"), "--out", str(blocker / "x")]) == 2
    assert main(["run", scenario_path("normal_form_k3.scn"), "--stages", "converge,classify",
                 "--out", str(tmp_path / "c")]) == 2
    assert "StageDependencyError" in capsys.readouterr().err
    assert main(["run", scenario_path("heisenberg_plane.scn"), "--eps-override", "0.5,0",
                 "--out", str(tmp_path / "p")]) == 2


def test_cli_rejects_unknown_stage():
    with pytest.raises(SystemExit) as err:
        main(["run", scenario_path("normal_form_k3.scn"), "--stages", "classify,plot"])
    assert err.value.code == 2


def test_cli_density(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["density", scenario_path("heisenberg_plane.scn"), "--kind", "K_eps_sigma_eps", "--eps", "0.5",
                 "--n", "9", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    r = np.hypot(data[:, 0], data[:, 1])
    closed = -(r * r + 3.0) / (np.sqrt(0.5) * (r * r + 2.0) ** 1.5)
    assert np.allclose(data[:, 2], closed, rtol=1e-9)
