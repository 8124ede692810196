"""Figure rendering for the reproduction recipes.

Each recipe table renders to one PNG next to its CSV.  Import stays local
to the reproduce path: nothing else in the package touches matplotlib.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless; must precede pyplot

import matplotlib.pyplot as plt

from .recipes import RecipeTable

_SERIES_COLUMN = "series"


def _grouped(table: RecipeTable, x_col: str, y_col: str):
    """Yield (series, xs, ys) preserving first-appearance series order."""
    xi = table.columns.index(x_col)
    yi = table.columns.index(y_col)
    si = table.columns.index(_SERIES_COLUMN)
    order: list[str] = []
    data: dict[str, tuple[list, list]] = {}
    for row in table.rows:
        key = row[si]
        if key not in data:
            order.append(key)
            data[key] = ([], [])
        data[key][0].append(row[xi])
        data[key][1].append(row[yi])
    for key in order:
        yield key, data[key][0], data[key][1]


def render_table(table: RecipeTable, out_dir: str | Path) -> Path:
    """Render one recipe table to ``<out_dir>/<name>.png``."""
    out = Path(out_dir) / f"{table.name}.png"
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if table.name == "table1":
        labels = [row[0] for row in table.rows]
        cars = [row[table.columns.index("max_car")] for row in table.rows]
        ax.bar(labels, cars, color="#4878a8")
        ax.set_xlabel("channel")
        ax.set_ylabel("peak CAR at fitted operating point")
    elif table.name == "fig3a":
        for series, xs, ys in _grouped(table, "power_mw", "rate_hz"):
            ax.plot(xs, ys, marker="o", markersize=3, label=series)
        ax.set_xlabel("pump power (mW)")
        ax.set_ylabel("heralded rate (Hz)")
        ax.legend()
    elif table.name in ("fig3b", "fig3c"):
        for series, xs, ys in _grouped(table, "rate_hz", "car"):
            ax.plot(xs, ys, label=series)
        ax.set_xscale("log")
        ax.set_xlabel("coincidence rate (Hz)")
        ax.set_ylabel("CAR")
        ax.legend()
    else:
        plt.close(fig)
        raise ValueError(f"no renderer for table {table.name!r}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
