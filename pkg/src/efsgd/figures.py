"""Matplotlib rendering of trace CSVs: f - f* on a log scale vs epochs/bits.

The report path of the CLI; the acceptance suite never needs it.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from efsgd.engine import TRACE_COLUMNS


class TraceSchemaError(ValueError):
    pass


def read_trace_csv(path) -> dict[str, list[float]]:
    """Parse an engine trace CSV, validating the column schema."""
    path = Path(path)
    with open(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceSchemaError(f"{path}: empty file")
        if tuple(header) != TRACE_COLUMNS:
            unexpected = [h for h in header if h not in TRACE_COLUMNS]
            missing = [c for c in TRACE_COLUMNS if c not in header]
            raise TraceSchemaError(
                f"{path}: bad schema (missing {missing}, unexpected {unexpected})"
            )
        cols: dict[str, list[float]] = {c: [] for c in TRACE_COLUMNS}
        for row in reader:
            for name, cell in zip(TRACE_COLUMNS, row):
                cols[name].append(float(cell) if cell != "" else float("nan"))
    if not cols["k"]:
        raise TraceSchemaError(f"{path}: no data rows")
    return cols


def _epochs(cols, path: Path) -> list[float]:
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        nm = meta["problem"]["n"] * meta["problem"]["m"]
    else:
        nm = 1
    return [g / nm for g in cols["grad_evals"]]


_X_LABEL = {"epochs": "epochs", "bits_up": "uplink bits (total)", "k": "iteration"}


def render_figure(series, out_path, x_axis: str = "epochs", title: str | None = None):
    """Render (csv_path, label) pairs into one log-scale convergence figure.

    Points are plotted exactly as recorded, at the CSV's own stride; nothing
    is interpolated.
    """
    if x_axis not in _X_LABEL:
        raise ValueError(f"unknown x axis {x_axis!r}")
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for path, label in series:
        path = Path(path)
        cols = read_trace_csv(path)
        xs = _epochs(cols, path) if x_axis == "epochs" else cols[x_axis]
        ys = [max(v, 1e-16) for v in cols["f_gap"]]
        ax.plot(xs, ys, label=label, linewidth=1.4)
    ax.set_yscale("log")
    ax.set_xlabel(_X_LABEL[x_axis])
    ax.set_ylabel(r"$f(x^k) - f(x^*)$")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
