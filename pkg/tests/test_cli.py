import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from hyreach import export, runs, setalg
from hyreach.cli import main
from hyreach.scenario import parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def short_scenario(tmp_path, name="reach_heat_compare", **overrides):
    doc = json.loads((SCENARIOS / f"{name}.json").read_text())
    doc.setdefault("reach", {}).update({"horizon": "20 s"})
    doc["validation"] = {"n_samples": 30, "substeps": 50}
    for key, value in overrides.items():
        doc[key] = value
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(doc))
    return p


def test_reach_ok(tmp_path, capsys):
    p = short_scenario(tmp_path)
    assert main(["reach", str(p), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "containment 30/30" in out
    rep = json.loads((tmp_path / "o" / "report_reach_unconstrained.json").read_text())
    assert rep["containment"]["violations"] == 0
    assert (tmp_path / "o" / "tube_unconstrained.csv").exists()


def test_missing_scenario(tmp_path, capsys):
    assert main(["reach", str(tmp_path / "missing.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_scenario(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema_version": 1, "initial_set": {"center": [1, 2]}, "controls": {}}))
    assert main(["heat", str(p)]) == 2
    assert "initial_set" in capsys.readouterr().err


def test_emptied_branch_is_infeasible(tmp_path):
    p = short_scenario(tmp_path)
    assert main(["reach", str(p), "--constrained", "--out", str(tmp_path / "o")]) == 3


def test_empty_mpc_tube_is_infeasible(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "mpc_heat_limited.json").read_text())
    doc["mpc"]["duration"] = "1 s"
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    assert main(["mpc", str(p), "--out", str(tmp_path / "o")]) == 3
    assert "empty" in capsys.readouterr().err


def test_validate_reports_containment_failures(tmp_path):
    p = short_scenario(tmp_path)
    cfg = parse_scenario(p)
    tube = runs.compute_tube(cfg)
    tube.steps = [replace(s, set=setalg.ConstrainedZonotope(s.set.center, 0.5 * s.set.generators, s.set.A, s.set.b)) for s in tube.steps]
    export.write_tube_json(tube, tmp_path / "small.json")
    assert main(["validate", str(tmp_path / "small.json"), str(p), "--samples", "30",
                 "--out", str(tmp_path / "v")]) == 4
    rep = json.loads((tmp_path / "v" / "report_validate.json").read_text())
    assert rep["containment"]["violations"] > 0 and rep["containment"]["replay_seeds"]


def test_non_binding_constraint_matches_unconstrained(tmp_path):
    p = short_scenario(tmp_path, thermal={"Qdot_max": "1e30 W/m^2"})
    cfg = parse_scenario(p)
    a = runs.compute_tube(cfg, constrained=False)
    b = runs.compute_tube(cfg, constrained=True)
    assert len(a.steps) == len(b.steps) and not b.terminated
    rows_a = export.hull_table(a)
    rows_b = export.hull_table(b)
    for ra, rb in zip(rows_a, rows_b):
        np.testing.assert_allclose(ra["box"].lower, rb["box"].lower, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(ra["box"].upper, rb["box"].upper, rtol=1e-9, atol=1e-9)


def test_heat_command(tmp_path, capsys):
    p = short_scenario(tmp_path, name="heat_limit_curve")
    assert main(["heat", str(p), "--out", str(tmp_path / "h")]) == 0
    assert "peak heat" in capsys.readouterr().out
    assert export.check_csv(tmp_path / "h" / "heat_profile.csv", "heat_profile") > 0


@pytest.mark.slow
def test_short_mpc_run(tmp_path):
    doc = json.loads((SCENARIOS / "mpc_nominal.json").read_text())
    doc["mpc"]["duration"] = "2 s"
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    assert main(["mpc", str(p), "--out", str(tmp_path / "o")]) == 0
    assert export.check_csv(tmp_path / "o" / "closed_loop_tube.csv", "closed_loop") == 21
