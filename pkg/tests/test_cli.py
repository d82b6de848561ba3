import json
from pathlib import Path

import pytest

from artifact import __version__
from artifact.cli import list_catalog, main, parse_scenario, run_scenario
from artifact.errors import ScenarioError

SCEN = Path(__file__).resolve().parent.parent / "scenarios"


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


@pytest.mark.parametrize("doc, needle", [
    ({"suites": ["constants"], "manifold": {"name": "nowhere"}}, "manifold.name"),
    ({"suites": ["constants"], "manifold": {"name": "euclidean", "params": 3}}, "manifold.params"),
    ({"suites": ["warp"]}, "suites[0]"),
    ({"suites": []}, "suites"),
    ({"suites": ["constants"], "bounds": {"K": "big", "H": 0, "i0": 1}}, "bounds.K"),
    ({"suites": ["constants"], "params": {"speed": 1}}, "params.speed"),
    ({"suites": ["constants"], "colour": "red"}, "colour"),
    ({"suites": ["constants"], "seed": "x"}, "seed"),
])
def test_parse_errors_name_field(doc, needle):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(json.dumps(doc))
    assert needle in str(exc.value)


def test_parse_error_names_line():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario('{\n  "suites": [\n  "constants",,\n]}', "bad.json")
    assert "bad.json" in str(exc.value) and "line 3" in str(exc.value)


def test_main_parse_error_exit_code(tmp_path, capsys):
    p = write(tmp_path, {"suites": ["nope"]})
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "suites[0]" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2


def test_catalog_listing(capsys):
    assert main(["catalog"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert "circle_in_C" in doc["lagrangians"] and "euclidean" in doc["manifolds"]
    assert "flat" in doc["domains"]


def test_catalog_filter():
    doc = list_catalog("circle")
    assert set(doc["lagrangians"]) == {"circle_in_C", "circle_times_line", "flat_torus_circle"}
    assert doc["manifolds"] == {}
    assert all(v == {} for v in list_catalog("zzz").values())


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and __version__ in capsys.readouterr().out


def test_constants_subcommand(tmp_path, capsys):
    p = write(tmp_path, {"K": 1.0, "H": 1.0, "i0": 2.0, "injrad_L": 2.0})
    assert main(["constants", str(p)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["delta"]["value"] == pytest.approx(1.0)


def test_constants_subcommand_bad_field(tmp_path, capsys):
    p = write(tmp_path, {"K": 1.0, "i0": 2.0})
    assert main(["constants", str(p)]) == 2
    assert "'H'" in capsys.readouterr().err


def test_failing_suite_does_not_stop_others(tmp_path):
    doc = {"name": "partial", "manifold": {"name": "euclidean", "params": {"n": 2}},
           "bounds": {"K": 1.0, "H": 1.0, "i0": 2.0}, "suites": ["tameness", "cylinder", "constants"]}
    rep = run_scenario(parse_scenario(json.dumps(doc)), tmp_path)
    assert rep["suites"]["tameness"]["status"] == "error"
    assert rep["suites"]["cylinder"]["status"] == "error"
    assert rep["suites"]["constants"]["status"] == "completed"
    assert rep["summary"]["constants"] == "pass" and not rep["passed"]
    assert (tmp_path / "constants.csv").exists()


def test_run_exit_zero_on_completed_run(tmp_path, capsys):
    doc = {"suites": ["tameness"]}
    p = write(tmp_path, doc)
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 0
    assert "tameness: error" in capsys.readouterr().out


def test_flat_scenario_outputs(tmp_path):
    rep = run_scenario(SCEN / "flat_line.json", tmp_path)
    assert rep["passed"]
    assert "reflection_metric.csv" in rep["csv_files"]
    header = (tmp_path / "reflection_metric.csv").read_text().splitlines()[0]
    assert header.split(",")[0]
    timing = json.loads((tmp_path / "timing.json").read_text())
    assert "reflection" in timing["wall_clock_seconds"]


def test_reports_deterministic(tmp_path):
    a = run_scenario(SCEN / "cylinder.json", tmp_path / "a", seed=3)
    b = run_scenario(SCEN / "cylinder.json", tmp_path / "b", seed=3)
    assert a["passed"]
    for name in ["report.json"] + a["csv_files"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
