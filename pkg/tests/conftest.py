"""Shared scenario builders for the test suite."""

from __future__ import annotations

from dataclasses import replace

from heraldmux import (
    ChannelSpec,
    DetectorSpec,
    LaserSpec,
    MCSettings,
    MuxTopology,
    Scenario,
    SwitchSpec,
    cascade_topology,
)

REP_RATE_HZ = 76e6
GATE_NS = 5.0


def make_laser(rep_rate_hz: float = REP_RATE_HZ) -> LaserSpec:
    return LaserSpec(rep_rate_hz=rep_rate_hz, wavelength_nm=710.0,
                     bandwidth_ghz=300.0, pulse_duration_ps=1.2)


def make_herald(dark_rate_hz: float = 1800.0, deadtime_us: float = 0.0,
                efficiency: float = 1.0) -> DetectorSpec:
    return DetectorSpec(efficiency=efficiency, dark_rate_hz=dark_rate_hz,
                        gate_window_ns=GATE_NS, deadtime_us=deadtime_us,
                        role="herald")


def make_output(dark_rate_hz: float = 1200.0, deadtime_us: float = 0.0,
                efficiency: float = 1.0) -> DetectorSpec:
    return DetectorSpec(efficiency=efficiency, dark_rate_hz=dark_rate_hz,
                        gate_window_ns=GATE_NS, deadtime_us=deadtime_us,
                        role="heralded")


def make_single(mean_pairs: float = 0.01, idler_db: float = 19.0,
                signal_db: float = 33.0, herald_dark_hz: float = 1800.0,
                output_dark_hz: float = 1200.0, num_pulses: int = 1_000_000,
                seed: int = 1, shards: int = 1,
                photon_cap: int | None = None,
                herald_deadtime_us: float = 0.0,
                output_deadtime_us: float = 0.0,
                statistics: str = "poisson") -> Scenario:
    """One-channel switchless scenario with loss split across the two arms."""
    ch = ChannelSpec(label="ch1", mean_pairs_per_pulse=mean_pairs,
                     idler_loss_db=idler_db, signal_loss_db=signal_db)
    return Scenario(
        laser=make_laser(),
        channels=(ch,),
        herald_detectors=(make_herald(herald_dark_hz, herald_deadtime_us),),
        heralded_detector=make_output(output_dark_hz, output_deadtime_us),
        topology=MuxTopology(num_channels=1, switch_paths={"ch1": ()},
                             switches={}, policy=("ch1",)),
        pair_statistics=statistics,
        mc=MCSettings(num_pulses=num_pulses, seed=seed, shards=shards,
                      photon_cap=photon_cap),
    )


def make_pair(mu=(0.3, 0.2), idler_db=(3.0, 4.0), signal_db=(3.0, 5.0),
              herald_dark_hz=(76_000.0, 38_000.0), output_dark_hz=38_000.0,
              switch_db: float = 1.0, latency_pulses: int = 0,
              num_pulses: int = 1_000_000, seed: int = 1,
              photon_cap: int | None = 3,
              statistics: str = "poisson") -> Scenario:
    """Two channels joined by one switch, with boosted probabilities."""
    labels = ("chA", "chB")
    channels = tuple(
        ChannelSpec(label=lbl, mean_pairs_per_pulse=m, idler_loss_db=idb,
                    signal_loss_db=sdb)
        for lbl, m, idb, sdb in zip(labels, mu, idler_db, signal_db))
    heralds = tuple(make_herald(d) for d in herald_dark_hz)
    switch = SwitchSpec(insertion_loss_db=switch_db,
                        reconfig_latency_pulses=latency_pulses)
    return Scenario(
        laser=make_laser(),
        channels=channels,
        herald_detectors=heralds,
        heralded_detector=make_output(output_dark_hz),
        topology=MuxTopology(num_channels=2,
                             switch_paths={lbl: ("s1",) for lbl in labels},
                             switches={"s1": switch}, policy=labels),
        pair_statistics=statistics,
        mc=MCSettings(num_pulses=num_pulses, seed=seed, shards=1,
                      photon_cap=photon_cap),
    )


def make_identical_mux(base: Scenario, copies: int, switch_loss_db: float,
                       num_pulses: int, seed: int) -> Scenario:
    """Replicate the single channel of ``base`` behind a switch cascade."""
    template = base.channels[0]
    herald = base.herald_detectors[0]
    labels = tuple(f"ch{i + 1}" for i in range(copies))
    channels = tuple(replace(template, label=lbl) for lbl in labels)
    return replace(
        base,
        channels=channels,
        herald_detectors=(herald,) * copies,
        topology=cascade_topology(labels, SwitchSpec(insertion_loss_db=switch_loss_db)),
        mc=replace(base.mc, num_pulses=num_pulses, seed=seed),
    )
