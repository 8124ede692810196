"""Domain types and probability primitives for pulsed pair sources.

A multiplexed heralded source is described here as a pulsed laser driving N
probabilistic pair sources (channels).  Each channel sends its idler photon
through a lossy path to a gated herald detector and its signal photon through
a lossy path into a switch tree that routes at most one channel per pulse to
the common output, where a gated detector fires on the heralded photon.

Conventions used throughout the package:

* losses are attenuations in dB, transmission = 10**(-dB/10)
* one detector gate per pulse slot; per-slot probabilities live in [0, 1]
* dark rates are in Hz and convert to per-slot probabilities via the laser
  repetition rate
* detector deadtimes convert to whole blocked pulse slots (rounded up)
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

PAIR_STATISTICS = ("poisson", "thermal")
DETECTOR_ROLES = ("herald", "heralded")


class ScenarioError(ValueError):
    """A scenario or one of its components failed validation."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioError(msg)


# ---------------------------------------------------------------------------
# probability primitives
# ---------------------------------------------------------------------------

def db_to_transmission(loss_db: float) -> float:
    """Convert an attenuation in dB to a transmission probability.

    transmission = 10**(-loss_db/10).  Zero loss is unit transmission;
    negative loss would be gain, which a passive path cannot have.
    """
    if loss_db < 0.0:
        raise ValueError(f"loss must be >= 0 dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


def dark_prob_per_gate(dark_rate_hz: float, rep_rate_hz: float) -> float:
    """Probability of a dark count in one detector gate.

    One gate per pulse slot, so the expected dark counts per slot are
    dark_rate/rep_rate; the value is clamped to [0, 1] so that extreme
    rates still behave as probabilities.
    """
    if dark_rate_hz < 0.0:
        raise ValueError(f"dark rate must be >= 0 Hz, got {dark_rate_hz}")
    if rep_rate_hz <= 0.0:
        raise ValueError(f"repetition rate must be > 0 Hz, got {rep_rate_hz}")
    return min(1.0, dark_rate_hz / rep_rate_hz)


def deadtime_slots(deadtime_us: float, rep_rate_hz: float) -> int:
    """Number of whole pulse slots blocked after a detector click.

    Rounds up, since a partially blocked slot cannot fire.  Products that
    land within 1e-9 of an integer are snapped first so that float noise in
    e.g. 3 us x 76 MHz cannot turn 228 slots into 229.
    """
    if deadtime_us < 0.0:
        raise ValueError(f"deadtime must be >= 0 us, got {deadtime_us}")
    if rep_rate_hz <= 0.0:
        raise ValueError(f"repetition rate must be > 0 Hz, got {rep_rate_hz}")
    slots = deadtime_us * 1e-6 * rep_rate_hz
    nearest = round(slots)
    if abs(slots - nearest) < 1e-9:
        return int(nearest)
    return int(math.ceil(slots))


def draw_pair_number(
    mean_pairs: float,
    statistics: str,
    rng: np.random.Generator,
    size: Optional[int] = None,
):
    """Draw photon-pair numbers for pulses of a probabilistic source.

    Args:
        mean_pairs: mean pairs per pulse (mu).
        statistics: "poisson" for many-mode sources, "thermal" for a single
            mode, where P(n) = mu**n / (1 + mu)**(n + 1).
        rng: numpy Generator supplying the randomness.
        size: number of pulses to draw; None returns a scalar.

    Returns:
        int or int ndarray of pair numbers.
    """
    if mean_pairs < 0.0:
        raise ValueError(f"mean pairs per pulse must be >= 0, got {mean_pairs}")
    if statistics == "poisson":
        return rng.poisson(mean_pairs, size)
    if statistics == "thermal":
        if mean_pairs == 0.0:
            return 0 if size is None else np.zeros(size, dtype=np.int64)
        # geometric law on n >= 0 with success probability 1/(1+mu);
        # numpy's geometric counts trials, hence the -1 shift
        draw = rng.geometric(1.0 / (1.0 + mean_pairs), size)
        return draw - 1
    raise ValueError(f"unknown pair statistics {statistics!r}")


def thin(count, transmission: float, rng: np.random.Generator):
    """Binomially thin photon counts through a lossy element.

    Each of ``count`` photons independently survives with probability
    ``transmission``.  Accepts scalars or integer arrays.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    return rng.binomial(count, transmission)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LaserSpec:
    """Pulsed pump laser."""

    rep_rate_hz: float
    wavelength_nm: float
    bandwidth_ghz: float
    pulse_duration_ps: float

    def __post_init__(self) -> None:
        _require(self.rep_rate_hz > 0.0, "laser.rep_rate_hz must be > 0")
        _require(self.wavelength_nm > 0.0, "laser.wavelength_nm must be > 0")
        _require(self.bandwidth_ghz > 0.0, "laser.bandwidth_ghz must be > 0")
        _require(self.pulse_duration_ps > 0.0, "laser.pulse_duration_ps must be > 0")


@dataclass(frozen=True)
class ChannelSpec:
    """One pair source and its two lossy arms.

    ``idler_loss_db`` is the total idler-arm attenuation including the herald
    detector; ``signal_loss_db`` is the signal-arm attenuation up to, but not
    including, the switch tree and the final detector.
    """

    label: str
    mean_pairs_per_pulse: float
    idler_loss_db: float
    signal_loss_db: float
    brightness_slope_per_mw: Optional[float] = None

    def __post_init__(self) -> None:
        _require(bool(self.label), "channel label must be non-empty")
        _require(self.mean_pairs_per_pulse >= 0.0,
                 f"channel {self.label}: mean_pairs_per_pulse must be >= 0")
        _require(self.idler_loss_db >= 0.0,
                 f"channel {self.label}: idler_loss_db must be >= 0")
        _require(self.signal_loss_db >= 0.0,
                 f"channel {self.label}: signal_loss_db must be >= 0")
        if self.brightness_slope_per_mw is not None:
            _require(self.brightness_slope_per_mw >= 0.0,
                     f"channel {self.label}: brightness_slope_per_mw must be >= 0")


@dataclass(frozen=True)
class DetectorSpec:
    """Gated single-photon detector."""

    efficiency: float
    dark_rate_hz: float
    gate_window_ns: float
    deadtime_us: float
    role: str

    def __post_init__(self) -> None:
        _require(0.0 <= self.efficiency <= 1.0,
                 f"detector efficiency must be in [0, 1], got {self.efficiency}")
        _require(self.dark_rate_hz >= 0.0, "detector dark_rate_hz must be >= 0")
        _require(self.gate_window_ns > 0.0, "detector gate_window_ns must be > 0")
        _require(self.deadtime_us >= 0.0, "detector deadtime_us must be >= 0")
        _require(self.role in DETECTOR_ROLES,
                 f"detector role must be one of {DETECTOR_ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class SwitchSpec:
    """One routing switch of the combiner tree."""

    insertion_loss_db: float
    reconfig_latency_pulses: int = 0

    def __post_init__(self) -> None:
        _require(self.insertion_loss_db >= 0.0, "switch insertion_loss_db must be >= 0")
        _require(self.reconfig_latency_pulses >= 0,
                 "switch reconfig_latency_pulses must be >= 0")


@dataclass(frozen=True)
class MuxTopology:
    """Switch tree joining the channels into one output.

    ``switch_paths`` lists, per channel label, the switches traversed in
    order from the source towards the output.  Paths must form a tree: once
    two channels merge they stay merged, and all non-empty paths end at the
    same final switch.  ``policy`` is the routing priority, highest first.
    """

    num_channels: int
    switch_paths: dict[str, tuple[str, ...]] = field(default_factory=dict)
    switches: dict[str, SwitchSpec] = field(default_factory=dict)
    policy: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _require(self.num_channels >= 1, "topology.num_channels must be >= 1")
        _require(len(self.policy) == self.num_channels,
                 "topology.policy must list every channel exactly once")
        _require(len(set(self.policy)) == len(self.policy),
                 "topology.policy must not repeat channels")
        _require(set(self.switch_paths) == set(self.policy),
                 "topology.switch_paths must cover exactly the channels in policy")
        for label, path in self.switch_paths.items():
            _require(len(set(path)) == len(path),
                     f"topology path for {label} visits a switch twice")
            for sw in path:
                _require(sw in self.switches,
                         f"topology path for {label} names unknown switch {sw!r}")
        self._check_tree()

    def _check_tree(self) -> None:
        paths = list(self.switch_paths.values())
        non_empty = [p for p in paths if p]
        if non_empty:
            _require(len(non_empty) == len(paths),
                     "topology mixes switched and switchless channels")
            last = {p[-1] for p in non_empty}
            _require(len(last) == 1,
                     "topology paths must terminate at a single output switch")
        # merge property: once two paths share a switch, their remaining
        # suffixes must be identical
        for i, a in enumerate(non_empty):
            for b in non_empty[i + 1:]:
                shared = set(a) & set(b)
                if not shared:
                    continue
                ai = min(a.index(s) for s in shared)
                bi = min(b.index(s) for s in shared)
                _require(a[ai:] == b[bi:],
                         "topology paths diverge after merging, not a tree")

    def path_transmission(self, label: str) -> float:
        """Product of switch transmissions along one channel's path."""
        out = 1.0
        for sw in self.switch_paths[label]:
            out *= db_to_transmission(self.switches[sw].insertion_loss_db)
        return out


@dataclass(frozen=True)
class SpectralSpec:
    """Spectral layout of the pump, filters, and crystal acceptance."""

    pump_bandwidth_ghz: float
    idler_filter_bandwidth_ghz: float
    signal_filter_bandwidth_ghz: float
    phasematch_bandwidth_nm: float
    center_wavelength_nm: float
    temperature_ref_k: float
    tuning_slope_nm_per_k: float

    def __post_init__(self) -> None:
        for name in ("pump_bandwidth_ghz", "idler_filter_bandwidth_ghz",
                     "signal_filter_bandwidth_ghz", "phasematch_bandwidth_nm"):
            _require(getattr(self, name) > 0.0, f"spectral.{name} must be > 0")
        _require(self.center_wavelength_nm > 0.0,
                 "spectral.center_wavelength_nm must be > 0")
        _require(self.temperature_ref_k > 0.0,
                 "spectral.temperature_ref_k must be > 0")


@dataclass(frozen=True)
class MCSettings:
    """Monte Carlo run parameters.

    ``photon_cap`` truncates pair draws at min(n, cap); it exists so that
    exact finite enumerations can share the engine's pair-number law.
    """

    num_pulses: int
    seed: int
    shards: int = 1
    photon_cap: Optional[int] = None

    def __post_init__(self) -> None:
        _require(self.num_pulses > 0, "mc.num_pulses must be > 0")
        _require(0 <= self.seed < 2 ** 64, "mc.seed must fit in 64 bits")
        _require(self.shards >= 1, "mc.shards must be >= 1")
        if self.photon_cap is not None:
            _require(self.photon_cap >= 1, "mc.photon_cap must be >= 1")


@dataclass(frozen=True)
class Scenario:
    """Complete description of one source arrangement."""

    laser: LaserSpec
    channels: tuple[ChannelSpec, ...]
    herald_detectors: tuple[DetectorSpec, ...]
    heralded_detector: DetectorSpec
    topology: MuxTopology
    mc: MCSettings
    spectral: Optional[SpectralSpec] = None
    pair_statistics: str = "poisson"

    def __post_init__(self) -> None:
        _require(len(self.channels) >= 1, "scenario needs at least one channel")
        labels = [ch.label for ch in self.channels]
        _require(len(set(labels)) == len(labels), "channel labels must be unique")
        _require(len(self.herald_detectors) == len(self.channels),
                 "one herald detector per channel is required")
        for det in self.herald_detectors:
            _require(det.role == "herald",
                     "detectors in herald_detectors must have role 'herald'")
        _require(self.heralded_detector.role == "heralded",
                 "heralded_detector must have role 'heralded'")
        _require(self.topology.num_channels == len(self.channels),
                 "topology.num_channels must match the channel list")
        _require(set(self.topology.policy) == set(labels),
                 "topology.policy must name exactly the scenario channels")
        _require(self.pair_statistics in PAIR_STATISTICS,
                 f"pair_statistics must be one of {PAIR_STATISTICS}")

    def channel(self, label: str) -> ChannelSpec:
        for ch in self.channels:
            if ch.label == label:
                return ch
        raise KeyError(label)

    def herald_detector(self, label: str) -> DetectorSpec:
        for ch, det in zip(self.channels, self.herald_detectors):
            if ch.label == label:
                return det
        raise KeyError(label)


@dataclass(frozen=True)
class CountTally:
    """Raw counters from a simulated run.

    Per-channel tuples are ordered like ``Scenario.channels``.  ``selected``
    counts heralds that were actually routed to the output; coincidences and
    the shifted accidentals come from the gated output detector.
    """

    pulses: int
    herald_clicks: tuple[int, ...]
    selected: tuple[int, ...]
    coincidences_by_channel: tuple[int, ...]
    accidentals_shifted: int
    heralded_detector_darks: int

    def __post_init__(self) -> None:
        _require(self.pulses >= 0, "tally.pulses must be >= 0")
        n = len(self.herald_clicks)
        _require(len(self.selected) == n and len(self.coincidences_by_channel) == n,
                 "tally per-channel tuples must have equal length")
        for clicks, sel, coinc in zip(self.herald_clicks, self.selected,
                                      self.coincidences_by_channel):
            _require(0 <= sel <= clicks,
                     "tally: selected heralds cannot exceed herald clicks")
            _require(0 <= coinc <= sel,
                     "tally: coincidences cannot exceed selected heralds")
        _require(self.accidentals_shifted >= 0, "tally accidentals must be >= 0")
        _require(self.heralded_detector_darks >= 0, "tally darks must be >= 0")

    @property
    def coincidences(self) -> int:
        return sum(self.coincidences_by_channel)

    @property
    def total_herald_clicks(self) -> int:
        return sum(self.herald_clicks)

    def __add__(self, other: "CountTally") -> "CountTally":
        if len(other.herald_clicks) != len(self.herald_clicks):
            raise ValueError("cannot merge tallies with different channel counts")
        add = lambda a, b: tuple(x + y for x, y in zip(a, b))
        return CountTally(
            pulses=self.pulses + other.pulses,
            herald_clicks=add(self.herald_clicks, other.herald_clicks),
            selected=add(self.selected, other.selected),
            coincidences_by_channel=add(self.coincidences_by_channel,
                                        other.coincidences_by_channel),
            accidentals_shifted=self.accidentals_shifted + other.accidentals_shifted,
            heralded_detector_darks=(self.heralded_detector_darks
                                     + other.heralded_detector_darks),
        )


def scenario_digest(scenario: Scenario) -> str:
    """Short stable fingerprint of a scenario's full parameter set."""
    canonical = json.dumps(asdict(scenario), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
