"""Parameter sweeps, mux-vs-single comparisons, and power calibration.

Sweeps drive the analytic predictor and the Monte Carlo engine over a value
grid and emit rows with a fixed column set.  The mux comparison sweeps a
common pump scale per channel subset, interpolates each configuration's
coincidence rate at a reference CAR on the falling (high-rate) branch of
its curve, and reports rate enhancements over the best single channel of
the subset.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .analytic import (
    channels_from_scenario,
    mux_prediction,
    rate_hz,
)
from .engine import SimResult, run_sharded
from .model import (
    MuxTopology,
    Scenario,
    ScenarioError,
    SwitchSpec,
    db_to_transmission,
)

SWEEP_PARAMETERS = ("mu_scale", "power_mw")
SWEEP_ENGINES = ("analytic", "monte-carlo", "both")
REFERENCE_CAR = 10.0

SWEEP_CSV_COLUMNS = ("sweep_param", "value", "engine", "rate_hz", "rate_err",
                     "car", "car_err", "coincidences", "accidentals", "seed")

# default pump-scale grid for mux comparisons: log-spaced decades
_SCALE_DECADES = (-4.0, 4.0)
_SCALE_POINTS = 241


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter, its grid, and which engines to run."""

    parameter: str
    grid: tuple[float, ...]
    engine: str = "analytic"

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ScenarioError(
                f"sweep.parameter must be one of {SWEEP_PARAMETERS}, "
                f"got {self.parameter!r}")
        if self.engine not in SWEEP_ENGINES:
            raise ScenarioError(
                f"sweep.engine must be one of {SWEEP_ENGINES}, got {self.engine!r}")
        if len(self.grid) == 0:
            raise ScenarioError("sweep.grid must be non-empty")
        diffs = [b - a for a, b in zip(self.grid, self.grid[1:])]
        if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            if len(self.grid) > 1:
                raise ScenarioError("sweep.grid must be strictly monotone")


@dataclass(frozen=True)
class SweepRow:
    """One engine evaluation at one grid value.

    For monte-carlo rows ``coincidences`` and ``accidentals`` are raw
    counts and ``seed`` is set; for analytic rows they are expected
    per-pulse probabilities and ``seed`` is None.
    """

    sweep_param: str
    value: float
    engine: str
    rate_hz: float
    rate_err: float
    car: float
    car_err: float
    coincidences: float
    accidentals: float
    seed: Optional[int]


def _scenario_at(scenario: Scenario, parameter: str, value: float
                 ) -> tuple[Scenario, float]:
    """Resolve one sweep value into (scenario, common mu scale)."""
    if parameter == "mu_scale":
        if value < 0.0:
            raise ScenarioError("mu_scale sweep values must be >= 0")
        return scenario, value
    if parameter == "power_mw":
        if value < 0.0:
            raise ScenarioError("power_mw sweep values must be >= 0")
        new_channels = []
        for ch in scenario.channels:
            if ch.brightness_slope_per_mw is None:
                raise ScenarioError(
                    f"channel {ch.label} has no brightness_slope_per_mw, "
                    "cannot sweep pump power")
            new_channels.append(replace(
                ch, mean_pairs_per_pulse=ch.brightness_slope_per_mw * value))
        return replace(scenario, channels=tuple(new_channels)), 1.0
    raise ScenarioError(f"unknown sweep parameter {parameter!r}")


def _analytic_row(scenario: Scenario, parameter: str, value: float,
                  mu_scale: float) -> SweepRow:
    prediction = mux_prediction(channels_from_scenario(scenario, mu_scale),
                                scenario.topology)
    rep = scenario.laser.rep_rate_hz
    return SweepRow(
        sweep_param=parameter,
        value=value,
        engine="analytic",
        rate_hz=rate_hz(prediction.coincidence_prob_per_pulse, rep),
        rate_err=0.0,
        car=prediction.car,
        car_err=0.0,
        coincidences=prediction.coincidence_prob_per_pulse,
        accidentals=prediction.accidental_prob_per_pulse,
        seed=None,
    )


def _monte_carlo_row(scenario: Scenario, parameter: str, value: float,
                     mu_scale: float) -> SweepRow:
    result = run_sharded(scenario, mu_scale=mu_scale)
    return SweepRow(
        sweep_param=parameter,
        value=value,
        engine="monte-carlo",
        rate_hz=result.heralded_rate_hz,
        rate_err=result.heralded_rate_err_hz,
        car=result.car.value,
        car_err=result.car.stderr,
        coincidences=float(result.tally.coincidences),
        accidentals=float(result.tally.accidentals_shifted),
        seed=result.seed,
    )


def sweep(scenario: Scenario, spec: SweepSpec) -> list[SweepRow]:
    """Evaluate the scenario over the grid, analytic rows before MC rows.

    Every grid point reuses the scenario's seed, so monte-carlo rows form
    paired-seed comparisons across the grid.
    """
    rows = []
    for value in spec.grid:
        adjusted, mu_scale = _scenario_at(scenario, spec.parameter, value)
        if spec.engine in ("analytic", "both"):
            rows.append(_analytic_row(adjusted, spec.parameter, value, mu_scale))
        if spec.engine in ("monte-carlo", "both"):
            rows.append(_monte_carlo_row(adjusted, spec.parameter, value, mu_scale))
    return rows


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        raise TypeError("boolean has no CSV representation here")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def sweep_row_values(row: SweepRow) -> list[str]:
    """String form of one row, shared by the CSV and text renderers."""
    return [
        row.sweep_param,
        _csv_value(row.value),
        row.engine,
        _csv_value(row.rate_hz),
        _csv_value(row.rate_err),
        _csv_value(row.car),
        _csv_value(row.car_err),
        _csv_value(row.coincidences),
        _csv_value(row.accidentals),
        _csv_value(row.seed),
    ]


def write_sweep_csv(rows: Sequence[SweepRow], stream) -> None:
    """Write sweep rows with the fixed column set, deterministically."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_CSV_COLUMNS)
    for row in rows:
        writer.writerow(sweep_row_values(row))


def sweep_csv_text(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# mux comparison
# ---------------------------------------------------------------------------

def cascade_topology(labels: Sequence[str], template: SwitchSpec) -> MuxTopology:
    """Balanced pairwise combiner tree for the given channels.

    k channels are joined by k-1 identical switches; a single channel needs
    none.  Channel order doubles as routing priority.
    """
    labels = tuple(labels)
    switches: dict[str, SwitchSpec] = {}
    paths: dict[str, list[str]] = {lbl: [] for lbl in labels}
    groups: list[tuple[str, ...]] = [(lbl,) for lbl in labels]
    counter = 0
    while len(groups) > 1:
        merged = []
        for a, b in zip(groups[0::2], groups[1::2]):
            counter += 1
            name = f"sw{counter}"
            switches[name] = template
            for lbl in a + b:
                paths[lbl].append(name)
            merged.append(a + b)
        if len(groups) % 2 == 1:
            merged.append(groups[-1])
        groups = merged
    return MuxTopology(
        num_channels=len(labels),
        switch_paths={lbl: tuple(p) for lbl, p in paths.items()},
        switches=switches,
        policy=labels,
    )


def pruned_topology(topology: MuxTopology, labels: Sequence[str]) -> MuxTopology:
    """Restrict a switch tree to some channels, recabling away dead switches.

    A switch that joins fewer than two live inputs is a pass-through and is
    removed, as a smaller physical arrangement would not wire it in at all:
    two channels of a four-way tree end up behind a single switch, and one
    channel alone connects directly.  Dropping a switch can starve the next
    one downstream, so collapse runs to a fixed point.
    """
    labels = tuple(labels)
    paths = {lbl: topology.switch_paths[lbl] for lbl in labels}
    while True:
        inputs: dict[str, set] = {}
        for lbl, path in paths.items():
            upstream = lbl
            for sw in path:
                inputs.setdefault(sw, set()).add(upstream)
                upstream = sw
        drop = {sw for sw, feeds in inputs.items() if len(feeds) < 2}
        if not drop:
            break
        paths = {lbl: tuple(sw for sw in path if sw not in drop)
                 for lbl, path in paths.items()}
    used = {sw for path in paths.values() for sw in path}
    return MuxTopology(
        num_channels=len(labels),
        switch_paths=paths,
        switches={sw: topology.switches[sw] for sw in used},
        policy=labels,
    )


def subset_scenario(scenario: Scenario, labels: Sequence[str]) -> Scenario:
    """Restrict a scenario to some channels behind its pruned switch tree."""
    labels = tuple(labels)
    if len(labels) == 0:
        raise ScenarioError("channel subset must be non-empty")
    known = {ch.label for ch in scenario.channels}
    for lbl in labels:
        if lbl not in known:
            raise ScenarioError(f"unknown channel {lbl!r} in subset")
    if len(set(labels)) != len(labels):
        raise ScenarioError("channel subset must not repeat labels")
    chans = tuple(scenario.channel(lbl) for lbl in labels)
    dets = tuple(scenario.herald_detector(lbl) for lbl in labels)
    return replace(scenario, channels=chans, herald_detectors=dets,
                   topology=pruned_topology(scenario.topology, labels))


@dataclass(frozen=True)
class MuxCurve:
    """Analytic CAR and rate against a common pump scale."""

    mu_scales: tuple[float, ...]
    cars: tuple[float, ...]
    rates_hz: tuple[float, ...]

    def peak_index(self) -> int:
        return int(np.argmax(self.cars))

    @property
    def peak_car(self) -> float:
        return self.cars[self.peak_index()]


def analytic_curve(scenario: Scenario, grid: Sequence[float]) -> MuxCurve:
    rep = scenario.laser.rep_rate_hz
    cars = []
    rates = []
    for scale in grid:
        prediction = mux_prediction(channels_from_scenario(scenario, scale),
                                    scenario.topology)
        cars.append(prediction.car)
        rates.append(rate_hz(prediction.coincidence_prob_per_pulse, rep))
    return MuxCurve(tuple(grid), tuple(cars), tuple(rates))


def _interpolate_on_branch(xs: Sequence[float], cars: Sequence[float],
                           reference: float) -> Optional[float]:
    """Log-linear interpolation of x at a CAR level on a falling branch.

    ``cars`` must start at the branch peak and decrease; returns None when
    the reference is not bracketed.  The result always lies between the two
    bracketing x values.
    """
    for j in range(len(cars) - 1):
        hi, lo = cars[j], cars[j + 1]
        if hi == reference:
            return xs[j]
        if hi > reference >= lo:
            span = lo - hi
            frac = (reference - hi) / span
            log_x = math.log(xs[j]) + frac * (math.log(xs[j + 1])
                                              - math.log(xs[j]))
            return math.exp(log_x)
    if cars and cars[-1] == reference:
        return xs[-1]
    return None


def default_scale_grid(scenario: Scenario) -> tuple[float, ...]:
    """Log-spaced pump scales, capped so no channel exceeds one pair/pulse."""
    mu_max = max(ch.mean_pairs_per_pulse for ch in scenario.channels)
    lo, hi = _SCALE_DECADES
    if mu_max > 0.0:
        hi = min(hi, math.log10(0.999 / mu_max))
    if hi <= lo:
        raise ScenarioError("scenario mean pair numbers leave no sweepable range")
    return tuple(np.logspace(lo, hi, _SCALE_POINTS))


@dataclass(frozen=True)
class ConfigResult:
    """One configuration's standing in a mux comparison."""

    label: str
    channels: tuple[str, ...]
    peak_car: float
    base_rate_hz: float          # at the scenario's own pump scale
    base_car: float
    reachable: bool              # reference CAR inside the curve's range
    scale_at_reference: Optional[float]
    rate_hz_at_reference: Optional[float]
    enhancement: Optional[float]
    mc_rate_hz_at_reference: Optional[float] = None
    mc_rate_err_hz: Optional[float] = None
    mc_coincidences: Optional[int] = None


@dataclass(frozen=True)
class EnhancementReport:
    """Mux configurations against their best member channel alone."""

    reference_car: float
    configurations: tuple[ConfigResult, ...]
    singles: tuple[ConfigResult, ...]


def _evaluate_config(scenario: Scenario, labels: Sequence[str],
                     reference_car: float, grid: Sequence[float],
                     run_mc: bool) -> ConfigResult:
    sub = subset_scenario(scenario, labels)
    curve = analytic_curve(sub, grid)
    peak = curve.peak_index()
    branch_cars = curve.cars[peak:]
    branch_scales = curve.mu_scales[peak:]
    branch_rates = curve.rates_hz[peak:]
    scale_ref = _interpolate_on_branch(branch_scales, branch_cars, reference_car)
    rate_ref = _interpolate_on_branch(branch_rates, branch_cars, reference_car)

    base = mux_prediction(channels_from_scenario(sub, 1.0), sub.topology)
    base_rate = rate_hz(base.coincidence_prob_per_pulse,
                        scenario.laser.rep_rate_hz)

    mc_rate = mc_err = None
    mc_coinc = None
    if run_mc and scale_ref is not None:
        result = run_sharded(sub, mu_scale=scale_ref)
        mc_rate = result.heralded_rate_hz
        mc_err = result.heralded_rate_err_hz
        mc_coinc = result.tally.coincidences
    return ConfigResult(
        label="+".join(labels),
        channels=tuple(labels),
        peak_car=curve.peak_car,
        base_rate_hz=base_rate,
        base_car=base.car,
        reachable=scale_ref is not None,
        scale_at_reference=scale_ref,
        rate_hz_at_reference=rate_ref,
        enhancement=None,
        mc_rate_hz_at_reference=mc_rate,
        mc_rate_err_hz=mc_err,
        mc_coincidences=mc_coinc,
    )


def compare_mux(
    scenario: Scenario,
    channel_subsets: Sequence[Sequence[str]],
    reference_car: float = REFERENCE_CAR,
    engine: str = "analytic",
    grid: Optional[Sequence[float]] = None,
) -> EnhancementReport:
    """Interpolate each subset's rate at the reference CAR and compare.

    Each subset runs behind the scenario's switch tree pruned to its
    members (one channel: no switches).  The enhancement factor divides a
    configuration's rate at the reference CAR by the best rate among its
    member channels run alone, so a one-channel subset scores exactly 1.
    Configurations whose curves never reach the reference CAR are flagged
    unreachable.
    """
    if engine not in ("analytic", "both"):
        raise ScenarioError(
            "compare_mux engine must be 'analytic' or 'both'")
    if len(channel_subsets) == 0:
        raise ScenarioError("at least one channel subset is required")
    run_mc = engine == "both"
    if grid is None:
        grid = default_scale_grid(scenario)

    single_labels: list[str] = []
    for subset in channel_subsets:
        for lbl in subset:
            if lbl not in single_labels:
                single_labels.append(lbl)
    singles = {
        lbl: _evaluate_config(scenario, (lbl,), reference_car, grid, run_mc)
        for lbl in single_labels
    }

    configs = []
    for subset in channel_subsets:
        result = _evaluate_config(scenario, tuple(subset), reference_car,
                                  grid, run_mc)
        member_rates = [singles[lbl].rate_hz_at_reference for lbl in subset]
        usable = [r for r in member_rates if r is not None]
        enhancement = None
        if result.rate_hz_at_reference is not None and usable:
            enhancement = result.rate_hz_at_reference / max(usable)
        configs.append(replace(result, enhancement=enhancement))

    return EnhancementReport(
        reference_car=reference_car,
        configurations=tuple(configs),
        singles=tuple(singles[lbl] for lbl in single_labels),
    )


# ---------------------------------------------------------------------------
# power calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    """Least-squares brightness calibration of one channel.

    ``implied_mu_per_point`` holds the mean pair number each measured point
    implies through the channel's loss chain; comparing it against
    ``configured_mu`` exposes any tension with the configured brightness.
    """

    channel: str
    slope_hz_per_mw: float
    brightness_slope_per_mw: float
    residuals_hz: tuple[float, ...]
    points: tuple[tuple[float, float], ...]
    implied_mu_per_point: tuple[float, ...]
    configured_mu: float


def calibrate(scenario: Scenario, channel_label: str,
              measured: Sequence[tuple[float, float]]) -> CalibrationResult:
    """Fit rate = slope * power through the origin for one channel.

    The fitted slope in Hz/mW converts to pairs per pulse per mW through
    the channel's own loss chain (arm efficiencies including detectors, no
    switch tree) and the repetition rate.
    """
    if len(measured) == 0:
        raise ScenarioError("calibration needs at least one measured point")
    if channel_label not in {ch.label for ch in scenario.channels}:
        raise ScenarioError(f"unknown channel {channel_label!r}")
    for power, rate in measured:
        if power <= 0.0:
            raise ScenarioError("measured powers must be > 0 mW")
        if rate < 0.0:
            raise ScenarioError("measured rates must be >= 0 Hz")

    channel = scenario.channel(channel_label)
    herald_det = scenario.herald_detector(channel_label)
    idler_eff = (db_to_transmission(channel.idler_loss_db)
                 * herald_det.efficiency)
    signal_eff = (db_to_transmission(channel.signal_loss_db)
                  * scenario.heralded_detector.efficiency)
    pair_to_rate = scenario.laser.rep_rate_hz * signal_eff * idler_eff

    powers = np.array([p for p, _ in measured], dtype=float)
    rates = np.array([r for _, r in measured], dtype=float)
    slope = float((powers * rates).sum() / (powers * powers).sum())
    residuals = tuple(float(r) for r in rates - slope * powers)
    brightness = slope / pair_to_rate
    return CalibrationResult(
        channel=channel_label,
        slope_hz_per_mw=slope,
        brightness_slope_per_mw=brightness,
        residuals_hz=residuals,
        points=tuple((float(p), float(r)) for p, r in measured),
        implied_mu_per_point=tuple(float(brightness * p) for p in powers),
        configured_mu=channel.mean_pairs_per_pulse,
    )
