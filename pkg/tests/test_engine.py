"""Monte Carlo engine checks: determinism, mechanics, and statistics.

Statistical assertions run on fixed seeds with wide margins (4 standard
errors or a 1% chi-square), so they are deterministic in CI while still
meaning something.
"""

import math

import numpy as np
import pytest

from heraldmux import (
    db_to_transmission,
    estimate_car,
    run_sharded,
    scenario_digest,
    shard_pulse_counts,
    simulate,
)

import enumeration
from conftest import REP_RATE_HZ, make_pair, make_single


def test_simulate_equals_single_shard():
    sc = make_single(num_pulses=200_000, seed=3)
    assert simulate(sc).tally == run_sharded(sc, shard_count=1).tally


def test_same_seed_reproduces_different_seed_does_not():
    sc = make_single(mean_pairs=0.05, idler_db=10.0, signal_db=10.0,
                     num_pulses=300_000, seed=12)
    a = simulate(sc)
    b = simulate(sc)
    assert a.tally == b.tally
    assert a.scenario_digest == scenario_digest(sc)

    import dataclasses
    other = dataclasses.replace(sc, mc=dataclasses.replace(sc.mc, seed=13))
    assert simulate(other).tally != a.tally


def test_shard_split_and_merge():
    assert shard_pulse_counts(10, 3) == [4, 3, 3]
    assert shard_pulse_counts(4, 8) == [1, 1, 1, 1, 0, 0, 0, 0]
    with pytest.raises(ValueError):
        shard_pulse_counts(10, 0)

    sc = make_single(mean_pairs=0.05, idler_db=10.0, signal_db=10.0,
                     num_pulses=250_000, seed=9, shards=4)
    a = run_sharded(sc)
    b = run_sharded(sc)
    assert a.tally == b.tally
    assert a.pulses == 250_000
    assert a.shards == 4


def test_mu_scale_matches_rescaled_scenario():
    base = make_single(mean_pairs=0.02, idler_db=10.0, signal_db=10.0,
                       num_pulses=100_000, seed=21)
    doubled = make_single(mean_pairs=0.04, idler_db=10.0, signal_db=10.0,
                          num_pulses=100_000, seed=21)
    assert simulate(base, mu_scale=2.0).tally == simulate(doubled).tally


def test_herald_rate_matches_closed_form():
    mu, t = 0.05, 0.1
    sc = make_single(mean_pairs=mu, idler_db=10.0, signal_db=10.0,
                     herald_dark_hz=1800.0, num_pulses=2_000_000, seed=5)
    res = simulate(sc)
    d_i = 1800.0 / REP_RATE_HZ
    p = 1.0 - (1.0 - d_i) * math.exp(-mu * t)  # Poisson pairs, exact
    clicks = res.tally.herald_clicks[0]
    se = math.sqrt(sc.mc.num_pulses * p * (1 - p))
    assert abs(clicks - sc.mc.num_pulses * p) < 4 * se
    # switchless, zero latency: every herald click is routed
    assert res.tally.selected == res.tally.herald_clicks


def test_accidental_estimator_is_unconditional_singles():
    # The shifted-slot estimate draws the previous slot through the signal
    # arm, so its per-selection mean is the unconditional output click prob.
    mu, t_s = 0.2, db_to_transmission(3.0)
    d_s = 38_000.0 / REP_RATE_HZ
    sc = make_single(mean_pairs=mu, idler_db=3.0, signal_db=3.0,
                     herald_dark_hz=76_000.0, output_dark_hz=38_000.0,
                     num_pulses=1_000_000, seed=17, photon_cap=6)
    res = simulate(sc)
    pmf = enumeration.pair_pmf_capped(mu, "poisson", 6)
    p_acc = sum(pn * enumeration.click_prob(n, t_s, d_s)
                for n, pn in enumerate(pmf))
    selected = res.tally.selected[0]
    se = math.sqrt(selected * p_acc * (1 - p_acc))
    assert abs(res.tally.accidentals_shifted - selected * p_acc) < 4 * se


def test_single_channel_cells_match_enumeration():
    sc = make_single(mean_pairs=0.3, idler_db=3.0, signal_db=3.0,
                     herald_dark_hz=76_000.0, output_dark_hz=38_000.0,
                     num_pulses=1_000_000, seed=29, photon_cap=4)
    expected = enumeration.outcome_cells(sc, cap=4)
    observed = enumeration.tally_cells(sc, simulate(sc).tally)
    stat = enumeration.chi_square(observed, expected, sc.mc.num_pulses)
    assert stat < enumeration.CHI2_CRIT_1PCT[2], f"chi-square {stat:.2f}"


def test_three_channel_priority_cells_match_enumeration():
    from heraldmux import (ChannelSpec, MCSettings, Scenario, SwitchSpec,
                           cascade_topology)
    from conftest import make_herald, make_laser, make_output

    labels = ("a", "b", "c")
    mus = (0.2, 0.3, 0.25)
    channels = tuple(ChannelSpec(label=l, mean_pairs_per_pulse=m,
                                 idler_loss_db=3.0 + i, signal_loss_db=4.0)
                     for i, (l, m) in enumerate(zip(labels, mus)))
    sc = Scenario(
        laser=make_laser(),
        channels=channels,
        herald_detectors=tuple(make_herald(76_000.0) for _ in labels),
        heralded_detector=make_output(38_000.0),
        topology=cascade_topology(labels, SwitchSpec(insertion_loss_db=1.0)),
        mc=MCSettings(num_pulses=500_000, seed=41, shards=1, photon_cap=2),
    )
    expected = enumeration.outcome_cells(sc, cap=2)
    observed = enumeration.tally_cells(sc, simulate(sc).tally)
    stat = enumeration.chi_square(observed, expected, sc.mc.num_pulses)
    assert stat < enumeration.CHI2_CRIT_1PCT[6], f"chi-square {stat:.2f}"


def test_thermal_pair_cells_match_enumeration():
    sc = make_pair(num_pulses=1_000_000, seed=53, photon_cap=3,
                   statistics="thermal")
    expected = enumeration.outcome_cells(sc, cap=3)
    observed = enumeration.tally_cells(sc, simulate(sc).tally)
    stat = enumeration.chi_square(observed, expected, sc.mc.num_pulses)
    assert stat < enumeration.CHI2_CRIT_1PCT[4], f"chi-square {stat:.2f}"


def test_higher_loss_heralds_less():
    totals = []
    for extra_db in (0.0, 3.0):
        clicks = 0
        for seed in range(10):
            sc = make_single(mean_pairs=0.1, idler_db=10.0 + extra_db,
                             signal_db=10.0, num_pulses=100_000, seed=seed)
            clicks += simulate(sc).tally.herald_clicks[0]
        totals.append(clicks)
    assert totals[1] < totals[0]


def test_herald_deadtime_ceiling():
    # deadtime 3 us at 76 MHz blocks 228 slots; with a click in essentially
    # every live slot the counter must hit its ceiling exactly
    pulses = 100_000
    sc = make_single(mean_pairs=20.0, idler_db=0.0, signal_db=10.0,
                     herald_dark_hz=0.0, num_pulses=pulses, seed=2,
                     herald_deadtime_us=3.0)
    res = simulate(sc)
    ceiling = (pulses - 1) // 229 + 1
    assert res.tally.herald_clicks[0] == ceiling


def test_output_deadtime_blocks_gate():
    pulses = 100_000
    sc = make_single(mean_pairs=5.0, idler_db=0.0, signal_db=0.5,
                     herald_dark_hz=0.0, output_dark_hz=0.0,
                     num_pulses=pulses, seed=4, output_deadtime_us=3.0)
    res = simulate(sc)
    ceiling = (pulses - 1) // 229 + 1
    assert res.tally.coincidences <= ceiling
    assert res.tally.coincidences > 0.95 * ceiling
    # heralds keep firing while the output gate is closed
    assert res.tally.selected[0] > 10 * res.tally.coincidences


def test_reconfig_latency_drops_heralds():
    free = make_pair(mu=(0.5, 0.5), switch_db=0.0, latency_pulses=0,
                     num_pulses=200_000, seed=31, photon_cap=None)
    locked = make_pair(mu=(0.5, 0.5), switch_db=0.0, latency_pulses=50,
                       num_pulses=200_000, seed=31, photon_cap=None)
    res_free = simulate(free)
    res_locked = simulate(locked)
    # without latency the priority channel never loses a slot
    assert res_free.tally.selected[0] == res_free.tally.herald_clicks[0]
    assert sum(res_locked.tally.selected) < sum(res_free.tally.selected)


def test_estimate_car_cases():
    est = estimate_car(100, 10)
    assert est.value == 10.0
    assert est.stderr == pytest.approx(10.0 * math.sqrt(1 / 100 + 1 / 10))
    assert not est.lower_bound

    floor = estimate_car(5, 0)
    assert floor.value == 5.0
    assert floor.lower_bound
    assert math.isnan(floor.stderr)

    zero = estimate_car(0, 10)
    assert zero.value == 0.0
    assert math.isnan(zero.stderr)

    with pytest.raises(ValueError):
        estimate_car(-1, 0)


def test_result_rates_derive_from_tally():
    sc = make_single(mean_pairs=0.1, idler_db=5.0, signal_db=5.0,
                     num_pulses=200_000, seed=8)
    res = simulate(sc)
    t = res.tally
    assert res.heralded_rate_hz == pytest.approx(
        t.coincidences / t.pulses * REP_RATE_HZ)
    assert res.heralded_rate_err_hz == pytest.approx(
        math.sqrt(t.coincidences) / t.pulses * REP_RATE_HZ)
    assert res.per_channel_rate_hz[0] == res.heralded_rate_hz
