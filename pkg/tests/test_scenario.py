"""Scenario schema: round trips, rational fidelity, validation errors."""

from fractions import Fraction
from pathlib import Path

import pytest

from balloon.scenario import (
    InvalidScenario,
    NodeSpec,
    ScenarioConfig,
    dump_scenario,
    load_scenario,
    load_scenario_file,
    scenario_from_dict,
    scenario_to_dict,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def _minimal(**overrides) -> dict:
    data = {
        "nodes": [{"share": "1/2"}, {"share": "1/2"}],
        "protocol": {"delay_bound": "1"},
        "network": {"base_delay": "2/5", "jitter": "1/5"},
    }
    data.update(overrides)
    return data


def test_bundled_scenarios_load_and_round_trip():
    files = sorted(SCENARIO_DIR.glob("*.yaml"))
    assert len(files) >= 4
    for path in files:
        cfg = load_scenario_file(str(path))
        text = dump_scenario(cfg)
        again = load_scenario(text)
        assert again == cfg, path.name
        # canonical form is a fixed point
        assert dump_scenario(again) == text, path.name


def test_rationals_survive_dump_exactly():
    cfg = scenario_from_dict(_minimal(mine_rate="7/3"))
    data = scenario_to_dict(cfg)
    assert data["mine_rate"] == "7/3"
    assert data["nodes"][0]["share"] == "1/2"
    again = scenario_from_dict(data)
    assert again.mine_rate == Fraction(7, 3)
    assert again == cfg


def test_share_sum_must_be_one():
    with pytest.raises(InvalidScenario, match="sum to 1"):
        scenario_from_dict(_minimal(nodes=[{"share": "1/2"}, {"share": "1/3"}]))


def test_delay_budget_checked_against_protocol():
    with pytest.raises(InvalidScenario, match="delay bound"):
        scenario_from_dict(_minimal(network={"base_delay": "4/5",
                                             "jitter": "1/4"}))


def test_strategy_parameter_requirements():
    with pytest.raises(ValueError, match="withhold_horizon"):
        NodeSpec(share="1/2", strategy="withholder")
    with pytest.raises(ValueError, match="period"):
        NodeSpec(share="1/2", strategy="power_oscillator")
    with pytest.raises(ValueError, match="burst_every"):
        NodeSpec(share="1/2", strategy="clock_attacker")
    spec = NodeSpec(share="1/2", strategy="withholder", withhold_horizon="3")
    assert spec.withhold_horizon == Fraction(3)


def test_schedule_validation():
    bad = _minimal(schedule=[{"time": 5.0, "kind": "power",
                              "node": 9, "share": "1"}])
    with pytest.raises(InvalidScenario, match="unknown node"):
        scenario_from_dict(bad)
    with pytest.raises(InvalidScenario, match="node and share"):
        scenario_from_dict(_minimal(schedule=[{"time": 5.0, "kind": "power"}]))
    with pytest.raises(InvalidScenario, match="non-negative"):
        scenario_from_dict(_minimal(schedule=[{"time": -1.0, "kind": "probe"}]))


def test_scalar_bounds():
    with pytest.raises(InvalidScenario, match="duration"):
        scenario_from_dict(_minimal(duration=0))
    with pytest.raises(InvalidScenario, match="mine_rate"):
        scenario_from_dict(_minimal(mine_rate="0"))
    with pytest.raises(InvalidScenario):
        scenario_from_dict(_minimal(nodes=[]))
    with pytest.raises(InvalidScenario, match="mine_rate"):
        scenario_from_dict(_minimal(mine_rate="1/0"))


def test_yaml_errors_wrapped():
    with pytest.raises(InvalidScenario, match="bad yaml"):
        load_scenario("nodes: [}")
    with pytest.raises(InvalidScenario, match="mapping"):
        load_scenario("- just\n- a\n- list\n")
    with pytest.raises(InvalidScenario, match="cannot read"):
        load_scenario_file("/nonexistent/path.yaml")


def test_defaults_applied():
    cfg = scenario_from_dict(_minimal())
    assert cfg.seed == 0
    assert cfg.probe_interval == 0.0
    assert cfg.tx_per_block == 1
    assert cfg.nodes[0].strategy == "honest"
    assert cfg.network.bursts == []
