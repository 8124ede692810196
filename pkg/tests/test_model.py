"""Unit checks for the probability primitives and domain types."""

import math

import numpy as np
import pytest

from heraldmux import (
    CountTally,
    DetectorSpec,
    MuxTopology,
    ScenarioError,
    SwitchSpec,
    dark_prob_per_gate,
    db_to_transmission,
    deadtime_slots,
    draw_pair_number,
    scenario_digest,
    thin,
)

from conftest import REP_RATE_HZ, make_single


def test_db_to_transmission_reference_points():
    assert db_to_transmission(0.0) == 1.0
    assert db_to_transmission(10.0) == pytest.approx(0.1, rel=1e-15)
    assert db_to_transmission(3.0) == pytest.approx(10.0 ** -0.3, rel=1e-15)
    # 19 dB and 33 dB are the herald/output arm budgets used throughout
    assert db_to_transmission(19.0) == pytest.approx(0.012589254117941675)
    with pytest.raises(ValueError):
        db_to_transmission(-0.1)


def test_dark_prob_per_gate_is_rate_over_rep():
    assert dark_prob_per_gate(1800.0, REP_RATE_HZ) == pytest.approx(
        1800.0 / 76e6, rel=1e-15)
    assert dark_prob_per_gate(0.0, REP_RATE_HZ) == 0.0
    # pathological rates clamp instead of leaving the probability range
    assert dark_prob_per_gate(1e12, REP_RATE_HZ) == 1.0
    with pytest.raises(ValueError):
        dark_prob_per_gate(-1.0, REP_RATE_HZ)
    with pytest.raises(ValueError):
        dark_prob_per_gate(1.0, 0.0)


def test_deadtime_slots_snaps_exact_products():
    # 3 us x 76 MHz = 228.0 exactly; float noise must not push it to 229
    assert deadtime_slots(3.0, REP_RATE_HZ) == 228
    assert deadtime_slots(0.0, REP_RATE_HZ) == 0
    # partial slots round up: 0.02 us x 76 MHz = 1.52
    assert deadtime_slots(0.02, REP_RATE_HZ) == 2
    with pytest.raises(ValueError):
        deadtime_slots(-1.0, REP_RATE_HZ)


def test_draw_pair_number_moments():
    rng = np.random.default_rng(2024)
    n = 200_000
    mu = 0.8

    pois = draw_pair_number(mu, "poisson", rng, n)
    se_mean = math.sqrt(mu / n)
    assert abs(pois.mean() - mu) < 4 * se_mean

    therm = draw_pair_number(mu, "thermal", rng, n)
    var = mu * (1.0 + mu)  # geometric-on-n>=0 variance
    assert abs(therm.mean() - mu) < 4 * math.sqrt(var / n)
    assert abs(therm.var() - var) < 0.05 * var
    assert therm.min() >= 0

    assert draw_pair_number(0.0, "thermal", rng) == 0
    with pytest.raises(ValueError):
        draw_pair_number(0.1, "binomial", rng)
    with pytest.raises(ValueError):
        draw_pair_number(-0.1, "poisson", rng)


def test_thermal_pmf_matches_closed_form():
    rng = np.random.default_rng(7)
    mu = 0.5
    n = 400_000
    draws = draw_pair_number(mu, "thermal", rng, n)
    for k in range(4):
        expected = mu ** k / (1.0 + mu) ** (k + 1)
        observed = float((draws == k).mean())
        se = math.sqrt(expected * (1 - expected) / n)
        assert abs(observed - expected) < 4 * se, f"P({k}) off: {observed} vs {expected}"


def test_thin_endpoints_and_mean():
    rng = np.random.default_rng(11)
    counts = rng.poisson(3.0, 50_000)
    assert thin(counts, 0.0, rng).sum() == 0
    assert (thin(counts, 1.0, rng) == counts).all()
    survived = thin(counts, 0.3, rng)
    assert survived.mean() == pytest.approx(0.3 * counts.mean(), rel=0.02)
    with pytest.raises(ValueError):
        thin(counts, 1.5, rng)


def test_detector_spec_rejects_bad_values():
    good = dict(efficiency=0.5, dark_rate_hz=100.0, gate_window_ns=5.0,
                deadtime_us=0.0, role="herald")
    DetectorSpec(**good)
    for field, bad in [("efficiency", 1.5), ("dark_rate_hz", -1.0),
                       ("gate_window_ns", 0.0), ("deadtime_us", -0.5),
                       ("role", "veto")]:
        with pytest.raises(ScenarioError):
            DetectorSpec(**{**good, field: bad})


def test_topology_tree_validation():
    sw = SwitchSpec(insertion_loss_db=1.0)
    # valid 2-1 tree
    topo = MuxTopology(num_channels=2,
                       switch_paths={"a": ("s1",), "b": ("s1",)},
                       switches={"s1": sw}, policy=("a", "b"))
    assert topo.path_transmission("a") == pytest.approx(10.0 ** -0.1)

    with pytest.raises(ScenarioError):  # unknown switch in a path
        MuxTopology(num_channels=2,
                    switch_paths={"a": ("s9",), "b": ("s1",)},
                    switches={"s1": sw}, policy=("a", "b"))
    with pytest.raises(ScenarioError):  # mixed switched and switchless
        MuxTopology(num_channels=2,
                    switch_paths={"a": ("s1",), "b": ()},
                    switches={"s1": sw}, policy=("a", "b"))
    with pytest.raises(ScenarioError):  # two distinct terminal switches
        MuxTopology(num_channels=2,
                    switch_paths={"a": ("s1",), "b": ("s2",)},
                    switches={"s1": sw, "s2": sw}, policy=("a", "b"))
    with pytest.raises(ScenarioError):  # paths diverge after merging
        MuxTopology(num_channels=2,
                    switch_paths={"a": ("s1", "s2", "s3"), "b": ("s1", "s3")},
                    switches={"s1": sw, "s2": sw, "s3": sw},
                    policy=("a", "b"))


def test_tally_validation_and_merge():
    t1 = CountTally(pulses=100, herald_clicks=(10, 4), selected=(9, 2),
                    coincidences_by_channel=(5, 1), accidentals_shifted=2,
                    heralded_detector_darks=1)
    t2 = CountTally(pulses=50, herald_clicks=(3, 3), selected=(3, 1),
                    coincidences_by_channel=(2, 0), accidentals_shifted=0,
                    heralded_detector_darks=0)
    merged = t1 + t2
    assert merged.pulses == 150
    assert merged.herald_clicks == (13, 7)
    assert merged.coincidences == 8
    assert merged.total_herald_clicks == 20

    with pytest.raises(ScenarioError):  # selected cannot exceed clicks
        CountTally(pulses=10, herald_clicks=(1,), selected=(2,),
                   coincidences_by_channel=(0,), accidentals_shifted=0,
                   heralded_detector_darks=0)
    with pytest.raises(ValueError):  # channel count mismatch on merge
        t1 + CountTally(pulses=1, herald_clicks=(0,), selected=(0,),
                        coincidences_by_channel=(0,), accidentals_shifted=0,
                        heralded_detector_darks=0)


def test_scenario_lookup_and_digest():
    sc = make_single()
    assert sc.channel("ch1").label == "ch1"
    assert sc.herald_detector("ch1").role == "herald"
    with pytest.raises(KeyError):
        sc.channel("ch9")

    digest = scenario_digest(sc)
    assert len(digest) == 12
    assert digest == scenario_digest(make_single())  # stable across builds
    assert digest != scenario_digest(make_single(mean_pairs=0.02))
