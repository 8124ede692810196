"""Command-line interface.

Commands: ``analytic``, ``simulate``, ``sweep``, ``mux-compare``,
``calibrate``, ``reproduce``.  Scenario arguments accept a file path or the
bare name of a bundled scenario.  Output goes to stdout as CSV or aligned
text carrying identical numeric content; ``--out DIR`` additionally writes
CSV files (and PNG figures for the figure recipes).

Exit codes: 0 success, 2 validation or parse failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import recipes
from .analytic import (
    car,
    channels_from_scenario,
    mux_prediction,
    optimal_operating_point,
    rate_hz,
)
from .engine import run_sharded
from .model import Scenario, ScenarioError
from .runner import (
    SWEEP_CSV_COLUMNS,
    SweepSpec,
    _csv_value,
    calibrate,
    compare_mux,
    sweep,
    sweep_row_values,
)
from .scenario_io import ScenarioFile, list_bundled, load_bundled, load_scenario_file


def _value(v) -> str:
    """Stringify one cell; booleans render as true/false, None empty."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return _csv_value(v)


def _render(columns: Sequence[str], rows: Sequence[Sequence[str]],
            fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
        return buf.getvalue()
    widths = [len(c) for c in columns]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _write_csv_file(columns: Sequence[str], rows: Sequence[Sequence[str]],
                    path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _emit(columns: Sequence[str], rows: Sequence[Sequence[str]],
          args, stem: str) -> None:
    sys.stdout.write(_render(columns, rows, args.format))
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv_file(columns, rows, out_dir / f"{stem}.csv")


def _load(path_or_name: str) -> ScenarioFile:
    path = Path(path_or_name)
    if path.exists():
        return load_scenario_file(path)
    if "/" not in path_or_name and not path_or_name.endswith(".scenario"):
        try:
            return load_bundled(path_or_name)
        except ScenarioError:
            pass
    known = ", ".join(list_bundled())
    raise ScenarioError(
        f"scenario {path_or_name!r} is neither a file nor a bundled "
        f"scenario (bundled: {known})")


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    mc = scenario.mc
    if getattr(args, "pulses", None) is not None:
        mc = replace(mc, num_pulses=args.pulses)
    if getattr(args, "seed", None) is not None:
        mc = replace(mc, seed=args.seed)
    if getattr(args, "shards", None) is not None:
        mc = replace(mc, shards=args.shards)
    return replace(scenario, mc=mc)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_analytic(args) -> int:
    scenario = _load(args.scenario).scenario
    channels = channels_from_scenario(scenario)
    rep = scenario.laser.rep_rate_hz
    columns = ("channel", "mean_pairs_per_pulse", "coincidence_prob",
               "rate_hz", "herald_prob", "optimal_coincidence_prob",
               "max_car", "car")
    rows = []
    for spec, ach in zip(scenario.channels, channels):
        if ach.idler_dark_prob > 0.0 and ach.signal_dark_prob > 0.0:
            point = optimal_operating_point(
                ach.signal_eff, ach.idler_eff,
                ach.idler_dark_prob, ach.signal_dark_prob)
            c_star, car_max = point.coincidence_prob, point.car
        else:
            c_star = car_max = None  # no interior optimum without noise
        car_here = car(ach.coincidence_prob, ach.signal_eff, ach.idler_eff,
                       ach.idler_dark_prob, ach.signal_dark_prob)
        rows.append([
            spec.label,
            _value(spec.mean_pairs_per_pulse),
            _value(ach.coincidence_prob),
            _value(rate_hz(ach.coincidence_prob, rep)),
            _value(ach.herald_prob()),
            _value(c_star),
            _value(car_max),
            _value(car_here),
        ])
    prediction = mux_prediction(channels, scenario.topology)
    rows.append([
        "mux",
        "",
        _value(prediction.coincidence_prob_per_pulse),
        _value(rate_hz(prediction.coincidence_prob_per_pulse, rep)),
        _value(prediction.herald_prob_per_pulse),
        "",
        "",
        _value(prediction.car),
    ])
    _emit(columns, rows, args, "analytic")
    return 0


def _cmd_simulate(args) -> int:
    scenario = _apply_overrides(_load(args.scenario).scenario, args)
    result = run_sharded(scenario, scenario.mc.shards)
    tally = result.tally
    columns = ["pulses", "seed", "shards", "scenario_digest",
               "coincidences", "accidentals", "heralded_darks",
               "car", "car_err", "car_lower_bound", "rate_hz", "rate_err"]
    row = [
        _value(tally.pulses),
        _value(result.seed),
        _value(result.shards),
        result.scenario_digest,
        _value(tally.coincidences),
        _value(tally.accidentals_shifted),
        _value(tally.heralded_detector_darks),
        _value(result.car.value),
        _value(result.car.stderr),
        _value(result.car.lower_bound),
        _value(result.heralded_rate_hz),
        _value(result.heralded_rate_err_hz),
    ]
    for i, ch in enumerate(scenario.channels):
        columns.extend([f"herald_clicks_{ch.label}", f"selected_{ch.label}",
                        f"coincidences_{ch.label}", f"rate_hz_{ch.label}"])
        row.extend([
            _value(tally.herald_clicks[i]),
            _value(tally.selected[i]),
            _value(tally.coincidences_by_channel[i]),
            _value(result.per_channel_rate_hz[i]),
        ])
    _emit(tuple(columns), [row], args, "simulate")
    return 0


def _cmd_sweep(args) -> int:
    loaded = _load(args.scenario)
    if loaded.sweep is None:
        raise ScenarioError(
            "scenario file has no sweep section; add one or use "
            "'analytic'/'simulate'")
    scenario = _apply_overrides(loaded.scenario, args)
    rows = sweep(scenario, loaded.sweep)
    _emit(SWEEP_CSV_COLUMNS, [sweep_row_values(r) for r in rows], args, "sweep")
    return 0


def _parse_subsets(text: str) -> list[list[str]]:
    subsets = []
    for group in text.split(","):
        members = [m.strip() for m in group.split("+") if m.strip()]
        if not members:
            raise ScenarioError(f"empty channel group in subsets {text!r}")
        subsets.append(members)
    return subsets


def _default_subsets(scenario: Scenario) -> list[list[str]]:
    labels = {ch.label for ch in scenario.channels}
    presets = [list(members) for _, members in recipes.MUX_PRESETS
               if set(members) <= labels]
    if presets:
        return presets
    singles = [[ch.label] for ch in scenario.channels]
    return singles + [[ch.label for ch in scenario.channels]]


def _cmd_mux_compare(args) -> int:
    scenario = _apply_overrides(_load(args.scenario).scenario, args)
    subsets = (_parse_subsets(args.subsets) if args.subsets
               else _default_subsets(scenario))
    report = compare_mux(scenario, subsets, reference_car=args.car,
                         engine=args.engine)
    columns = ["kind", "config", "reference_car", "reachable", "peak_car",
               "base_rate_hz", "base_car", "scale_at_reference",
               "rate_hz_at_reference", "enhancement"]
    if args.engine == "both":
        columns += ["mc_rate_hz_at_reference", "mc_rate_err_hz",
                    "mc_coincidences"]
    rows = []
    for kind, results in (("single", report.singles),
                          ("mux", report.configurations)):
        for cfg in results:
            row = [
                kind,
                cfg.label,
                _value(report.reference_car),
                _value(cfg.reachable),
                _value(cfg.peak_car),
                _value(cfg.base_rate_hz),
                _value(cfg.base_car),
                _value(cfg.scale_at_reference),
                _value(cfg.rate_hz_at_reference),
                _value(cfg.enhancement),
            ]
            if args.engine == "both":
                row += [
                    _value(cfg.mc_rate_hz_at_reference),
                    _value(cfg.mc_rate_err_hz),
                    _value(cfg.mc_coincidences),
                ]
            rows.append(row)
    _emit(tuple(columns), rows, args, "mux_compare")
    return 0


def _parse_points(specs: list[str]) -> list[tuple[float, float]]:
    points = []
    for spec in specs:
        try:
            power_text, rate_text = spec.split(":", 1)
            points.append((float(power_text), float(rate_text)))
        except ValueError:
            raise ScenarioError(
                f"calibration point {spec!r} must look like POWER_MW:RATE_HZ"
            ) from None
    return points


def _cmd_calibrate(args) -> int:
    scenario = _load(args.scenario).scenario
    points = _parse_points(args.point)
    result = calibrate(scenario, args.channel, points)
    columns = ("channel", "power_mw", "rate_hz", "residual_hz",
               "slope_hz_per_mw", "brightness_slope_per_mw", "implied_mu",
               "configured_mu", "implied_over_configured")
    rows = []
    for (power, rate), residual, implied in zip(result.points,
                                                result.residuals_hz,
                                                result.implied_mu_per_point):
        ratio = (implied / result.configured_mu
                 if result.configured_mu > 0.0 else None)
        rows.append([
            result.channel,
            _value(power),
            _value(rate),
            _value(residual),
            _value(result.slope_hz_per_mw),
            _value(result.brightness_slope_per_mw),
            _value(implied),
            _value(result.configured_mu),
            _value(ratio),
        ])
    _emit(columns, rows, args, "calibrate")
    return 0


def _cmd_reproduce(args) -> int:
    scenario = None
    if args.scenario is not None:
        scenario = _load(args.scenario).scenario
    table = recipes.reproduce(args.figure, scenario)
    rows = [[cell if isinstance(cell, str) else _value(cell) for cell in row]
            for row in table.rows]
    sys.stdout.write(_render(table.columns, rows, args.format))
    out_dir = Path(args.out) if args.out is not None else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv_file(table.columns, rows, out_dir / f"{table.name}.csv")
    if table.name != "table1":
        from . import plots  # matplotlib import only on the figure path
        png = plots.render_table(table, out_dir)
        sys.stderr.write(f"wrote {out_dir / (table.name + '.csv')} and {png}\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser, mc: bool = True) -> None:
    parser.add_argument("--format", choices=("csv", "text"), default="text",
                        help="stdout format (default text)")
    parser.add_argument("--out", default=None, metavar="DIR",
                        help="also write CSV output into this directory")
    if mc:
        parser.add_argument("--seed", type=int, default=None,
                            help="override the scenario's random seed")
        parser.add_argument("--pulses", type=int, default=None,
                            help="override the number of simulated pulses")
        parser.add_argument("--shards", type=int, default=None,
                            help="override the shard count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heraldmux",
        description="Analytics and Monte Carlo for multiplexed heralded "
                    "single-photon sources.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form per-channel and mux summary")
    p.add_argument("scenario", help="scenario file or bundled name")
    _add_common(p, mc=False)
    p.set_defaults(func=_cmd_analytic)

    p = sub.add_parser("simulate", help="run the Monte Carlo engine once")
    p.add_argument("scenario", help="scenario file or bundled name")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run the scenario's sweep section")
    p.add_argument("scenario", help="scenario file or bundled name")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("mux-compare",
                       help="rate enhancement at a reference CAR per subset")
    p.add_argument("scenario", help="scenario file or bundled name")
    p.add_argument("--subsets", default=None,
                   help="comma-separated channel groups joined by '+', "
                        "e.g. 'ch1,ch1+ch4,ch1+ch2+ch4'")
    p.add_argument("--car", type=float, default=10.0,
                   help="reference CAR level (default 10)")
    p.add_argument("--engine", choices=("analytic", "both"),
                   default="analytic",
                   help="add Monte Carlo verification rows with 'both'")
    _add_common(p)
    p.set_defaults(func=_cmd_mux_compare)

    p = sub.add_parser("calibrate",
                       help="fit a channel's brightness from measured rates")
    p.add_argument("scenario", help="scenario file or bundled name")
    p.add_argument("--channel", required=True, help="channel label")
    p.add_argument("--point", action="append", required=True,
                   metavar="POWER_MW:RATE_HZ",
                   help="measured point, repeatable")
    _add_common(p, mc=False)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("reproduce",
                       help="rebuild a reference table or figure dataset")
    p.add_argument("figure", choices=recipes.RECIPE_NAMES)
    p.add_argument("--scenario", default=None,
                   help="replacement scenario (default: bundled table1)")
    _add_common(p, mc=False)
    p.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (ValueError, KeyError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (RuntimeError, OSError) as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
