import json
import math
from pathlib import Path

import pytest

from hyreach.scenario import ScenarioError, load_scenario, parse_scenario, quantity, write_resolved

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
MINIMAL = {
    "schema_version": 1,
    "initial_set": {"center": [70000, 7000, 0, 0, 1.5, 0]},
    "controls": {"alpha": ["15 deg", "30 deg"], "beta": ["-60 deg", "-50 deg"]},
}


def test_quantities():
    assert quantity("6378 km", "length") == 6.378e6
    assert quantity(" -0.1 deg ", "angle") == pytest.approx(-0.1 * math.pi / 180)
    assert quantity(12, "time") == 12.0
    assert quantity("4.0 MW/m^2", "heat_flux") == 4.0e6
    with pytest.raises(ScenarioError, match="expected a length"):
        quantity("3 s", "length", "x")
    with pytest.raises(ScenarioError, match="unknown unit"):
        quantity("3 furlong", "length")
    with pytest.raises(ScenarioError):
        quantity("fast", "speed")


def test_minimal_file_gets_defaults():
    cfg = load_scenario(MINIMAL)
    assert cfg.seed == 42
    assert cfg.validation.n_samples == 1000
    assert cfg.reach.time_step == 10.0 and cfg.reach.horizon == 120.0
    assert cfg.thermal.Qdot_max == 4.0e6
    assert cfg.vehicle.m == 340.0
    assert cfg.mpc is None
    assert cfg.half_widths[0] == 500.0


def test_fixture_units_and_round_trip():
    cfg = parse_scenario(SCENARIOS / "vehicle_fixture.json")
    assert cfg.environment.Re == 6.378e6
    assert cfg.center[2] == pytest.approx(-0.1 * math.pi / 180)
    again = load_scenario(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_parse_and_round_trip(path):
    cfg = parse_scenario(path)
    assert load_scenario(cfg.to_dict()) == cfg


def test_field_level_errors():
    doc = json.loads(json.dumps(MINIMAL))
    doc["initial_set"]["center"] = [1, 2, 3]
    doc["seed"] = "x"
    with pytest.raises(ScenarioError) as info:
        load_scenario(doc)
    joined = " ".join(info.value.errors)
    assert "initial_set.center" in joined and "seed" in joined


def test_unit_errors_name_the_field():
    doc = json.loads(json.dumps(MINIMAL))
    doc["controls"]["alpha"] = ["15 m", "30 deg"]
    with pytest.raises(ScenarioError, match="controls.alpha"):
        load_scenario(doc)


def test_bad_bounds_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["controls"]["alpha"] = ["30 deg", "15 deg"]
    with pytest.raises(ScenarioError):
        load_scenario(doc)


def test_unsupported_version():
    with pytest.raises(ScenarioError):
        load_scenario(dict(MINIMAL, schema_version=2))


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_scenario(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ScenarioError):
        parse_scenario(bad)


def test_resolved_echo(tmp_path):
    cfg = load_scenario(MINIMAL)
    path = write_resolved(cfg, tmp_path)
    assert load_scenario(json.loads(path.read_text())) == cfg


def test_mpc_block():
    cfg = parse_scenario(SCENARIOS / "mpc_nominal.json")
    m = cfg.mpc_config()
    assert m.horizon == 20 and m.sampling_time == 0.1
    assert m.Q[0, 0] == 100.0 and m.R[1, 1] == 1.0


def test_mpc_sample_time_must_fit_the_tube_step():
    doc = json.loads(json.dumps(MINIMAL))
    doc["reach"] = {"time_step": "1 s"}
    doc["mpc"] = {"Ts": "0.3 s", "duration": "3 s"}
    with pytest.raises(ScenarioError, match="mpc.Ts"):
        load_scenario(doc)
    doc["mpc"]["Ts"] = "0.25 s"
    assert load_scenario(doc).mpc.Ts == 0.25
