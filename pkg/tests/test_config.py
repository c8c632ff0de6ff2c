"""Config schemas, semantic checks, hashing, and the block builders."""

import json
from importlib import resources

import pytest

from nekhlab.config import (
    ConfigError,
    build_family,
    build_horizon,
    build_integrable,
    build_mechanical,
    build_state,
    build_stepper,
    build_system,
    content_hash,
    load_config,
    schema_for,
    validate_config,
)
from nekhlab.experiments import HorizonRule, ScanFamily
from nekhlab.hamcore import (
    MechanicalSystem,
    PowerLaw,
    SlowSystem,
    mechanical_to_dict,
    system_to_dict,
)
from nekhlab.integrators import StepperSpec

BUNDLED = {
    "simulate_demo.json": "simulate",
    "drift_demo.json": "drift-scan",
    "theorem2_demo.json": "theorem2",
    "scaling_demo.json": "scaling-check",
    "steepness_demo.json": "steepness",
    "autonomize_demo.json": "autonomize-verify",
    "diophantine_demo.json": "diophantine",
}


def _demo_path(name: str):
    return resources.files("nekhlab") / "configs" / name


def _demo(name: str) -> dict:
    return json.loads(_demo_path(name).read_text())


@pytest.mark.parametrize("name,command", sorted(BUNDLED.items()))
def test_bundled_configs_validate(name, command):
    cfg = load_config(_demo_path(name), command)
    assert isinstance(cfg, dict)


def test_schema_lookup_rejects_unknown_commands():
    with pytest.raises(ConfigError, match="no config schema"):
        schema_for("frobnicate")
    assert schema_for("simulate")["additionalProperties"] is False


def test_config_must_be_an_object():
    with pytest.raises(ConfigError, match=r"\$: config must be a JSON object"):
        validate_config([1, 2, 3], "simulate")


def test_unknown_keys_are_rejected():
    cfg = _demo("simulate_demo.json")
    cfg["extra"] = 1
    with pytest.raises(ConfigError, match="extra"):
        validate_config(cfg, "simulate")


def test_missing_required_key():
    cfg = _demo("simulate_demo.json")
    del cfg["stepper"]
    with pytest.raises(ConfigError, match="stepper.*required"):
        validate_config(cfg, "simulate")


def test_type_errors_carry_the_json_path():
    cfg = _demo("drift_demo.json")
    cfg["epsilon_grid"] = [0.01, -1.0, 0.0001]
    with pytest.raises(ConfigError, match=r"\$\.epsilon_grid\[1\]"):
        validate_config(cfg, "drift-scan")


def test_epsilon_grid_must_decrease():
    cfg = _demo("drift_demo.json")
    cfg["epsilon_grid"] = list(reversed(cfg["epsilon_grid"]))
    with pytest.raises(ConfigError, match=r"\$\.epsilon_grid: must be strictly decreasing"):
        validate_config(cfg, "drift-scan")


def test_r_grid_rules():
    cfg = _demo("theorem2_demo.json")
    cfg["R_grid"] = [2, 2, 4, 8]
    with pytest.raises(ConfigError, match=r"\$\.R_grid: must be strictly increasing"):
        validate_config(cfg, "theorem2")
    cfg["R_grid"] = [2, 4]
    with pytest.raises(ConfigError, match=r"\$\.R_grid"):
        validate_config(cfg, "theorem2")


def test_state_dimension_must_match_the_system():
    cfg = _demo("simulate_demo.json")
    cfg["state"]["theta"] = [0.1, 0.2, 0.3]
    with pytest.raises(ConfigError, match=r"\$\.state\.theta"):
        validate_config(cfg, "simulate")

    cfg = _demo("scaling_demo.json")
    cfg["state"]["action"] = [0.8]
    with pytest.raises(ConfigError, match=r"\$\.state\.action"):
        validate_config(cfg, "scaling-check")


def test_family_blocks_must_be_dimension_consistent():
    cfg = _demo("drift_demo.json")
    cfg["family"]["perturbation"]["modes"][0]["k"] = [1, 0, 0]
    cfg["family"]["perturbation"]["modes"][0]["poly"][0]["alpha"] = [0, 0, 0]
    with pytest.raises(ConfigError, match=r"\$\.family"):
        validate_config(cfg, "drift-scan")


def test_autonomize_verify_pins_the_stepper():
    cfg = _demo("autonomize_demo.json")
    cfg["stepper"]["method"] = "yoshida4"
    with pytest.raises(ConfigError, match=r"\$\.stepper\.method"):
        validate_config(cfg, "autonomize-verify")


def test_load_config_reports_io_and_parse_failures(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.json", "simulate")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad, "simulate")


def test_content_hash_matches_git_blob_hashing():
    assert content_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"
    assert content_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def test_build_system_round_trips_the_config_block():
    block = _demo("simulate_demo.json")["system"]
    system = build_system(block)
    assert isinstance(system, SlowSystem)
    assert system.epsilon == 0.001 and system.c == 0.5
    assert isinstance(system.h, PowerLaw) and system.dimension == 2
    assert system_to_dict(system) == block


def test_build_mechanical_round_trips_the_config_block():
    block = _demo("theorem2_demo.json")["mechanical"]
    mech = build_mechanical(block)
    assert isinstance(mech, MechanicalSystem)
    assert mech.p == 2 and mech.dimension == 2
    assert mechanical_to_dict(mech) == block


def test_build_family_leaves_epsilon_free():
    block = _demo("drift_demo.json")["family"]
    family = build_family(block)
    assert isinstance(family, ScanFamily)
    assert family.dimension == 2 and family.c == 0.5
    assert family.system(5e-4).epsilon == 5e-4


def test_build_integrable_reads_the_steepness_target():
    block = _demo("steepness_demo.json")["hamiltonian"]
    h = build_integrable(block)
    assert isinstance(h, PowerLaw)
    assert h.p == 2 and h.dimension == 3 and h.radius == 1.0


def test_build_state_defaults_time_to_zero():
    st = build_state({"theta": [0.1, 0.7], "action": [0.3, -0.2]})
    assert st.time == 0.0
    assert list(st.theta) == [0.1, 0.7]
    timed = build_state({"theta": [0.1], "action": [0.3], "time": 2.5})
    assert timed.time == 2.5


def test_build_stepper_and_horizon():
    spec = build_stepper({"method": "yoshida6", "dt": 0.02})
    assert spec == StepperSpec(method="yoshida6", dt=0.02)
    rule = build_horizon({"kind": "fixed", "t0": 5.0, "q": 2.0, "cap_steps": 100})
    assert rule == HorizonRule(kind="fixed", t0=5.0, q=2.0, cap_steps=100)
