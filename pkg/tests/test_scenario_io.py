"""Strict YAML schema: round trips, bundled files, and rejection paths."""

import pytest

from heraldmux import (
    ScenarioError,
    SweepSpec,
    list_bundled,
    load_bundled,
    load_scenario_file,
    parse_scenario,
    serialize_scenario,
)

from conftest import make_pair, make_single

MINIMAL = """\
laser:
  rep_rate_hz: 76000000.0
  wavelength_nm: 710.0
  bandwidth_ghz: 300.0
  pulse_duration_ps: 1.2
channels:
  - label: ch1
    mean_pairs_per_pulse: 0.01
    idler_loss_db: 19.0
    signal_loss_db: 33.0
detectors:
  heralds:
    - channel: ch1
      efficiency: 1.0
      dark_rate_hz: 1800.0
      gate_window_ns: 5.0
      deadtime_us: 0.0
  heralded:
    efficiency: 1.0
    dark_rate_hz: 1200.0
    gate_window_ns: 5.0
    deadtime_us: 0.0
mc:
  num_pulses: 1000
  seed: 1
"""


def test_minimal_file_parses_with_defaults():
    loaded = parse_scenario(MINIMAL)
    sc = loaded.scenario
    assert loaded.sweep is None
    assert sc.pair_statistics == "poisson"
    assert sc.spectral is None
    assert sc.topology.switches == {}
    assert sc.topology.policy == ("ch1",)
    assert sc.mc.shards == 1
    assert sc.mc.photon_cap is None


def test_round_trip_identity_for_built_scenarios():
    for sc in (make_single(), make_pair(statistics="thermal", photon_cap=3)):
        again = parse_scenario(serialize_scenario(sc))
        assert again.scenario == sc


def test_round_trip_preserves_sweep():
    sc = make_single()
    spec = SweepSpec("mu_scale", (0.5, 1.0, 2.0), engine="both")
    loaded = parse_scenario(serialize_scenario(sc, spec))
    assert loaded.sweep == spec
    assert loaded.scenario == sc


def test_bundled_scenarios_load_and_round_trip():
    names = list_bundled()
    assert "table1" in names
    assert "channel1" in names

    table1 = load_bundled("table1").scenario
    assert tuple(ch.label for ch in table1.channels) == ("ch1", "ch2", "ch3",
                                                         "ch4")
    assert set(table1.topology.switches) == {"swA", "swB", "swC"}
    assert parse_scenario(serialize_scenario(table1)).scenario == table1

    channel1 = load_bundled("channel1")
    assert channel1.scenario.topology.switches == {}
    assert channel1.sweep is not None
    assert channel1.sweep.parameter == "mu_scale"

    with pytest.raises(ScenarioError, match="available"):
        load_bundled("tableX")


def test_load_scenario_file_reads_path(tmp_path):
    path = tmp_path / "one.scenario"
    path.write_text(MINIMAL)
    assert load_scenario_file(path).scenario == parse_scenario(MINIMAL).scenario


def test_unknown_keys_are_rejected_with_path():
    with pytest.raises(ScenarioError, match="unknown key 'lazer' in top level"):
        parse_scenario(MINIMAL + "lazer: {}\n")
    with pytest.raises(ScenarioError, match="laser"):
        parse_scenario(MINIMAL.replace("  rep_rate_hz:",
                                       "  rep_hz: 1.0\n  rep_rate_hz:"))
    with pytest.raises(ScenarioError, match="channels"):
        parse_scenario(MINIMAL.replace("    idler_loss_db:",
                                       "    idler_db: 1.0\n    idler_loss_db:"))
    with pytest.raises(ScenarioError, match="heralds"):
        parse_scenario(MINIMAL.replace("      dark_rate_hz: 1800.0",
                                       "      dark_rate_hz: 1800.0\n"
                                       "      jitter_ps: 40.0"))


def test_missing_required_keys_are_reported():
    with pytest.raises(ScenarioError, match="missing required key 'mc'"):
        parse_scenario(MINIMAL.replace("mc:\n  num_pulses: 1000\n  seed: 1\n",
                                       ""))
    with pytest.raises(ScenarioError, match="missing required key 'seed'"):
        parse_scenario(MINIMAL.replace("  seed: 1\n", ""))


def test_type_errors_are_rejected():
    with pytest.raises(ScenarioError, match="must be a number"):
        parse_scenario(MINIMAL.replace("rep_rate_hz: 76000000.0",
                                       "rep_rate_hz: fast"))
    with pytest.raises(ScenarioError, match="boolean"):
        parse_scenario(MINIMAL.replace("num_pulses: 1000", "num_pulses: true"))
    with pytest.raises(ScenarioError, match="must be an integer"):
        parse_scenario(MINIMAL.replace("num_pulses: 1000",
                                       "num_pulses: 1000.5"))
    # integral floats are accepted for integer fields
    assert parse_scenario(MINIMAL.replace(
        "num_pulses: 1000", "num_pulses: 1000.0")).scenario.mc.num_pulses == 1000


def test_detector_coverage_is_enforced():
    with pytest.raises(ScenarioError, match="unknown channel"):
        parse_scenario(MINIMAL.replace("    - channel: ch1",
                                       "    - channel: ch9"))
    two_heralds = MINIMAL.replace(
        "  heralded:",
        "    - channel: ch1\n"
        "      efficiency: 1.0\n"
        "      dark_rate_hz: 1800.0\n"
        "      gate_window_ns: 5.0\n"
        "      deadtime_us: 0.0\n"
        "  heralded:")
    with pytest.raises(ScenarioError, match="repeats channel"):
        parse_scenario(two_heralds)


def test_invalid_yaml_is_a_scenario_error():
    with pytest.raises(ScenarioError, match="not valid YAML"):
        parse_scenario("laser: [unclosed")
    with pytest.raises(ScenarioError, match="mapping"):
        parse_scenario("- just\n- a\n- list\n")


def test_serialize_omits_absent_sections():
    text = serialize_scenario(make_single())
    assert "spectral" not in text
    assert "sweep" not in text
    assert "photon_cap" not in text
    assert "brightness_slope_per_mw" not in text
