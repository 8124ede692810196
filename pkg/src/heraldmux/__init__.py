"""Simulation and analytics for spatially multiplexed heralded photon sources.

N probabilistic pair sources share a pulsed pump; each heralds its signal
photon by detecting the idler, and a switch tree routes at most one heralded
signal per pulse to a common gated detector.  The package provides the
closed-form coincidence-to-accidental model, a pulse-slot Monte Carlo engine
with detector deadtime and switch latency, parameter sweeps, and recipes
reproducing the reference four-channel system.
"""

from .analytic import (
    AnalyticChannel,
    MuxPrediction,
    OperatingPoint,
    bandwidth_nm_to_ghz,
    car,
    central_wavelength,
    channels_from_scenario,
    coincidence_per_pulse,
    fit_dark_signal,
    mux_prediction,
    optimal_operating_point,
    prob_per_pulse,
    rate_hz,
    spectral_overlap_factor,
)
from .engine import (
    CarEstimate,
    SimResult,
    estimate_car,
    run_sharded,
    shard_pulse_counts,
    simulate,
)
from .model import (
    ChannelSpec,
    CountTally,
    DetectorSpec,
    LaserSpec,
    MCSettings,
    MuxTopology,
    Scenario,
    ScenarioError,
    SpectralSpec,
    SwitchSpec,
    dark_prob_per_gate,
    db_to_transmission,
    deadtime_slots,
    draw_pair_number,
    scenario_digest,
    thin,
)
from .recipes import RecipeTable, reproduce
from .runner import (
    CalibrationResult,
    ConfigResult,
    EnhancementReport,
    SweepRow,
    SweepSpec,
    calibrate,
    cascade_topology,
    compare_mux,
    pruned_topology,
    subset_scenario,
    sweep,
    write_sweep_csv,
)
from .scenario_io import (
    ScenarioFile,
    list_bundled,
    load_bundled,
    load_scenario_file,
    parse_scenario,
    serialize_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticChannel",
    "CalibrationResult",
    "CarEstimate",
    "ChannelSpec",
    "ConfigResult",
    "CountTally",
    "DetectorSpec",
    "EnhancementReport",
    "LaserSpec",
    "MCSettings",
    "MuxPrediction",
    "MuxTopology",
    "OperatingPoint",
    "RecipeTable",
    "Scenario",
    "ScenarioError",
    "ScenarioFile",
    "SimResult",
    "SpectralSpec",
    "SweepRow",
    "SweepSpec",
    "SwitchSpec",
    "bandwidth_nm_to_ghz",
    "calibrate",
    "car",
    "cascade_topology",
    "central_wavelength",
    "channels_from_scenario",
    "coincidence_per_pulse",
    "compare_mux",
    "dark_prob_per_gate",
    "db_to_transmission",
    "deadtime_slots",
    "draw_pair_number",
    "estimate_car",
    "fit_dark_signal",
    "list_bundled",
    "load_bundled",
    "load_scenario_file",
    "mux_prediction",
    "optimal_operating_point",
    "parse_scenario",
    "prob_per_pulse",
    "pruned_topology",
    "rate_hz",
    "reproduce",
    "run_sharded",
    "scenario_digest",
    "serialize_scenario",
    "shard_pulse_counts",
    "simulate",
    "spectral_overlap_factor",
    "subset_scenario",
    "sweep",
    "thin",
    "write_sweep_csv",
]
