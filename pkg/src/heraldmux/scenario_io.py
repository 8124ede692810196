"""Strict YAML reading and writing of scenario files.

A scenario file is YAML with a fixed schema: unknown keys are rejected with
the offending key path, required keys must be present, and numbers must be
numbers (no strings).  Serialization round-trips exactly: parsing a dumped
scenario reproduces an equal object, value for value.

Bundled example scenarios ship inside the package under ``scenarios/`` with
a ``.scenario`` suffix and are addressed by bare name, e.g. ``table1``.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from .model import (
    ChannelSpec,
    DetectorSpec,
    LaserSpec,
    MCSettings,
    MuxTopology,
    Scenario,
    ScenarioError,
    SpectralSpec,
    SwitchSpec,
)
from .runner import SweepSpec

_BUNDLED_PACKAGE = "heraldmux"
_BUNDLED_DIR = "scenarios"
_SUFFIX = ".scenario"


@dataclass(frozen=True)
class ScenarioFile:
    """A parsed scenario plus its optional sweep block."""

    scenario: Scenario
    sweep: Optional[SweepSpec] = None


# ---------------------------------------------------------------------------
# low-level checked accessors
# ---------------------------------------------------------------------------

def _check_mapping(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(f"{path} must be a mapping, got {type(value).__name__}")
    return value


def _check_keys(mapping: dict, required: tuple[str, ...],
                optional: tuple[str, ...], path: str) -> None:
    allowed = set(required) | set(optional)
    for key in mapping:
        if key not in allowed:
            raise ScenarioError(
                f"unknown key {key!r} in {path} "
                f"(expected one of: {', '.join(sorted(allowed))})")
    for key in required:
        if key not in mapping:
            raise ScenarioError(f"missing required key {key!r} in {path}")


def _number(mapping: dict, key: str, path: str) -> float:
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(
            f"{path}.{key} must be a number, got {type(value).__name__}")
    return float(value)


def _integer(mapping: dict, key: str, path: str) -> int:
    value = mapping[key]
    if isinstance(value, bool):
        raise ScenarioError(f"{path}.{key} must be an integer, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ScenarioError(
        f"{path}.{key} must be an integer, got {value!r}")


def _string(mapping: dict, key: str, path: str) -> str:
    value = mapping[key]
    if not isinstance(value, str):
        raise ScenarioError(
            f"{path}.{key} must be a string, got {type(value).__name__}")
    return value


def _string_list(value: Any, path: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ScenarioError(f"{path} must be a list of strings")
    return tuple(value)


# ---------------------------------------------------------------------------
# section parsers
# ---------------------------------------------------------------------------

def _parse_laser(section: Any) -> LaserSpec:
    mapping = _check_mapping(section, "laser")
    _check_keys(mapping, ("rep_rate_hz", "wavelength_nm", "bandwidth_ghz",
                          "pulse_duration_ps"), (), "laser")
    return LaserSpec(
        rep_rate_hz=_number(mapping, "rep_rate_hz", "laser"),
        wavelength_nm=_number(mapping, "wavelength_nm", "laser"),
        bandwidth_ghz=_number(mapping, "bandwidth_ghz", "laser"),
        pulse_duration_ps=_number(mapping, "pulse_duration_ps", "laser"),
    )


def _parse_channel(entry: Any, index: int) -> ChannelSpec:
    path = f"channels[{index}]"
    mapping = _check_mapping(entry, path)
    _check_keys(mapping, ("label", "mean_pairs_per_pulse", "idler_loss_db",
                          "signal_loss_db"), ("brightness_slope_per_mw",), path)
    slope = None
    if "brightness_slope_per_mw" in mapping:
        slope = _number(mapping, "brightness_slope_per_mw", path)
    return ChannelSpec(
        label=_string(mapping, "label", path),
        mean_pairs_per_pulse=_number(mapping, "mean_pairs_per_pulse", path),
        idler_loss_db=_number(mapping, "idler_loss_db", path),
        signal_loss_db=_number(mapping, "signal_loss_db", path),
        brightness_slope_per_mw=slope,
    )


def _parse_detector(mapping: dict, path: str, role: str) -> DetectorSpec:
    return DetectorSpec(
        efficiency=_number(mapping, "efficiency", path),
        dark_rate_hz=_number(mapping, "dark_rate_hz", path),
        gate_window_ns=_number(mapping, "gate_window_ns", path),
        deadtime_us=_number(mapping, "deadtime_us", path),
        role=role,
    )


_DETECTOR_KEYS = ("efficiency", "dark_rate_hz", "gate_window_ns", "deadtime_us")


def _parse_detectors(section: Any, channel_labels: tuple[str, ...]
                     ) -> tuple[tuple[DetectorSpec, ...], DetectorSpec]:
    mapping = _check_mapping(section, "detectors")
    _check_keys(mapping, ("heralds", "heralded"), (), "detectors")

    entries = mapping["heralds"]
    if not isinstance(entries, list):
        raise ScenarioError("detectors.heralds must be a list")
    by_channel: dict[str, DetectorSpec] = {}
    for i, entry in enumerate(entries):
        path = f"detectors.heralds[{i}]"
        emap = _check_mapping(entry, path)
        _check_keys(emap, ("channel",) + _DETECTOR_KEYS, (), path)
        channel = _string(emap, "channel", path)
        if channel in by_channel:
            raise ScenarioError(f"{path} repeats channel {channel!r}")
        if channel not in channel_labels:
            raise ScenarioError(f"{path} names unknown channel {channel!r}")
        by_channel[channel] = _parse_detector(emap, path, "herald")
    missing = [lbl for lbl in channel_labels if lbl not in by_channel]
    if missing:
        raise ScenarioError(
            f"detectors.heralds is missing channels: {', '.join(missing)}")

    hpath = "detectors.heralded"
    hmap = _check_mapping(mapping["heralded"], hpath)
    _check_keys(hmap, _DETECTOR_KEYS, (), hpath)
    heralded = _parse_detector(hmap, hpath, "heralded")
    heralds = tuple(by_channel[lbl] for lbl in channel_labels)
    return heralds, heralded


def _parse_topology(section: Any, channel_labels: tuple[str, ...]) -> MuxTopology:
    if section is None:
        return MuxTopology(
            num_channels=len(channel_labels),
            switch_paths={lbl: () for lbl in channel_labels},
            switches={},
            policy=channel_labels,
        )
    mapping = _check_mapping(section, "topology")
    _check_keys(mapping, (), ("switches", "switch_paths", "policy"), "topology")

    switches: dict[str, SwitchSpec] = {}
    for name, spec in _check_mapping(mapping.get("switches", {}),
                                     "topology.switches").items():
        path = f"topology.switches.{name}"
        smap = _check_mapping(spec, path)
        _check_keys(smap, ("insertion_loss_db",), ("reconfig_latency_pulses",), path)
        latency = 0
        if "reconfig_latency_pulses" in smap:
            latency = _integer(smap, "reconfig_latency_pulses", path)
        switches[name] = SwitchSpec(
            insertion_loss_db=_number(smap, "insertion_loss_db", path),
            reconfig_latency_pulses=latency,
        )

    raw_paths = _check_mapping(mapping.get("switch_paths", {}),
                               "topology.switch_paths")
    switch_paths = {
        label: _string_list(path, f"topology.switch_paths.{label}")
        for label, path in raw_paths.items()
    }
    for lbl in channel_labels:
        switch_paths.setdefault(lbl, ())

    policy = channel_labels
    if "policy" in mapping:
        policy = _string_list(mapping["policy"], "topology.policy")
    return MuxTopology(
        num_channels=len(channel_labels),
        switch_paths=switch_paths,
        switches=switches,
        policy=policy,
    )


def _parse_spectral(section: Any) -> SpectralSpec:
    mapping = _check_mapping(section, "spectral")
    keys = ("pump_bandwidth_ghz", "idler_filter_bandwidth_ghz",
            "signal_filter_bandwidth_ghz", "phasematch_bandwidth_nm",
            "center_wavelength_nm", "temperature_ref_k", "tuning_slope_nm_per_k")
    _check_keys(mapping, keys, (), "spectral")
    return SpectralSpec(**{k: _number(mapping, k, "spectral") for k in keys})


def _parse_mc(section: Any) -> MCSettings:
    mapping = _check_mapping(section, "mc")
    _check_keys(mapping, ("num_pulses", "seed"), ("shards", "photon_cap"), "mc")
    cap = None
    if "photon_cap" in mapping and mapping["photon_cap"] is not None:
        cap = _integer(mapping, "photon_cap", "mc")
    shards = 1
    if "shards" in mapping:
        shards = _integer(mapping, "shards", "mc")
    return MCSettings(
        num_pulses=_integer(mapping, "num_pulses", "mc"),
        seed=_integer(mapping, "seed", "mc"),
        shards=shards,
        photon_cap=cap,
    )


def _parse_sweep(section: Any) -> SweepSpec:
    mapping = _check_mapping(section, "sweep")
    _check_keys(mapping, ("parameter", "grid"), ("engine",), "sweep")
    grid = mapping["grid"]
    if not isinstance(grid, list) or not grid:
        raise ScenarioError("sweep.grid must be a non-empty list of numbers")
    values = []
    for i, v in enumerate(grid):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"sweep.grid[{i}] must be a number, got {v!r}")
        values.append(float(v))
    engine = "analytic"
    if "engine" in mapping:
        engine = _string(mapping, "engine", "sweep")
    return SweepSpec(
        parameter=_string(mapping, "parameter", "sweep"),
        grid=tuple(values),
        engine=engine,
    )


_TOP_KEYS_REQUIRED = ("laser", "channels", "detectors", "mc")
_TOP_KEYS_OPTIONAL = ("topology", "spectral", "pair_statistics", "sweep")


def parse_scenario(text: str) -> ScenarioFile:
    """Parse scenario YAML text, rejecting anything outside the schema."""
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario file is not valid YAML: {exc}") from exc
    mapping = _check_mapping(root, "top level")
    _check_keys(mapping, _TOP_KEYS_REQUIRED, _TOP_KEYS_OPTIONAL, "top level")

    if not isinstance(mapping["channels"], list) or not mapping["channels"]:
        raise ScenarioError("channels must be a non-empty list")
    channels = tuple(_parse_channel(entry, i)
                     for i, entry in enumerate(mapping["channels"]))
    labels = tuple(ch.label for ch in channels)

    heralds, heralded = _parse_detectors(mapping["detectors"], labels)
    statistics = "poisson"
    if "pair_statistics" in mapping:
        statistics = _string(mapping, "pair_statistics", "top level")

    scenario = Scenario(
        laser=_parse_laser(mapping["laser"]),
        channels=channels,
        herald_detectors=heralds,
        heralded_detector=heralded,
        topology=_parse_topology(mapping.get("topology"), labels),
        mc=_parse_mc(mapping["mc"]),
        spectral=(_parse_spectral(mapping["spectral"])
                  if "spectral" in mapping else None),
        pair_statistics=statistics,
    )
    sweep = _parse_sweep(mapping["sweep"]) if "sweep" in mapping else None
    return ScenarioFile(scenario=scenario, sweep=sweep)


def load_scenario_file(path: str | Path) -> ScenarioFile:
    return parse_scenario(Path(path).read_text())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _detector_mapping(det: DetectorSpec) -> dict:
    return {
        "efficiency": det.efficiency,
        "dark_rate_hz": det.dark_rate_hz,
        "gate_window_ns": det.gate_window_ns,
        "deadtime_us": det.deadtime_us,
    }


def scenario_to_mapping(scenario: Scenario,
                        sweep: Optional[SweepSpec] = None) -> dict:
    """Plain-dict form of a scenario, sections in schema order."""
    channels = []
    for ch in scenario.channels:
        entry = {
            "label": ch.label,
            "mean_pairs_per_pulse": ch.mean_pairs_per_pulse,
            "idler_loss_db": ch.idler_loss_db,
            "signal_loss_db": ch.signal_loss_db,
        }
        if ch.brightness_slope_per_mw is not None:
            entry["brightness_slope_per_mw"] = ch.brightness_slope_per_mw
        channels.append(entry)

    heralds = []
    for ch, det in zip(scenario.channels, scenario.herald_detectors):
        entry = {"channel": ch.label}
        entry.update(_detector_mapping(det))
        heralds.append(entry)

    mapping: dict = {
        "laser": {
            "rep_rate_hz": scenario.laser.rep_rate_hz,
            "wavelength_nm": scenario.laser.wavelength_nm,
            "bandwidth_ghz": scenario.laser.bandwidth_ghz,
            "pulse_duration_ps": scenario.laser.pulse_duration_ps,
        },
        "channels": channels,
        "detectors": {
            "heralds": heralds,
            "heralded": _detector_mapping(scenario.heralded_detector),
        },
        "topology": {
            "switches": {
                name: {
                    "insertion_loss_db": sw.insertion_loss_db,
                    "reconfig_latency_pulses": sw.reconfig_latency_pulses,
                }
                for name, sw in sorted(scenario.topology.switches.items())
            },
            "switch_paths": {
                lbl: list(scenario.topology.switch_paths[lbl])
                for lbl in scenario.topology.policy
            },
            "policy": list(scenario.topology.policy),
        },
        "pair_statistics": scenario.pair_statistics,
    }
    if scenario.spectral is not None:
        sp = scenario.spectral
        mapping["spectral"] = {
            "pump_bandwidth_ghz": sp.pump_bandwidth_ghz,
            "idler_filter_bandwidth_ghz": sp.idler_filter_bandwidth_ghz,
            "signal_filter_bandwidth_ghz": sp.signal_filter_bandwidth_ghz,
            "phasematch_bandwidth_nm": sp.phasematch_bandwidth_nm,
            "center_wavelength_nm": sp.center_wavelength_nm,
            "temperature_ref_k": sp.temperature_ref_k,
            "tuning_slope_nm_per_k": sp.tuning_slope_nm_per_k,
        }
    mapping["mc"] = {
        "num_pulses": scenario.mc.num_pulses,
        "seed": scenario.mc.seed,
        "shards": scenario.mc.shards,
    }
    if scenario.mc.photon_cap is not None:
        mapping["mc"]["photon_cap"] = scenario.mc.photon_cap
    if sweep is not None:
        mapping["sweep"] = {
            "parameter": sweep.parameter,
            "grid": list(sweep.grid),
            "engine": sweep.engine,
        }
    return mapping


def serialize_scenario(scenario: Scenario,
                       sweep: Optional[SweepSpec] = None) -> str:
    """YAML text that parses back to an equal scenario (and sweep)."""
    return yaml.safe_dump(scenario_to_mapping(scenario, sweep),
                          sort_keys=False, default_flow_style=False)


# ---------------------------------------------------------------------------
# bundled scenarios
# ---------------------------------------------------------------------------

def list_bundled() -> tuple[str, ...]:
    """Names of the scenario files shipped with the package."""
    root = importlib.resources.files(_BUNDLED_PACKAGE) / _BUNDLED_DIR
    names = [entry.name[:-len(_SUFFIX)]
             for entry in root.iterdir() if entry.name.endswith(_SUFFIX)]
    return tuple(sorted(names))


def load_bundled(name: str) -> ScenarioFile:
    """Load a bundled scenario by bare name, e.g. ``table1``."""
    root = importlib.resources.files(_BUNDLED_PACKAGE) / _BUNDLED_DIR
    resource = root / f"{name}{_SUFFIX}"
    try:
        text = resource.read_text()
    except FileNotFoundError:
        known = ", ".join(list_bundled()) or "(none)"
        raise ScenarioError(
            f"no bundled scenario named {name!r} (available: {known})") from None
    return parse_scenario(text)
