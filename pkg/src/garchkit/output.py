"""Table, series-file, plot, and manifest emitters for the CLI pipeline.

Report tables (CSV and Markdown) round to a configured number of decimals;
series data files and JSON manifests keep full precision.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from ._version import __version__


def _cell(value, decimals: int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not np.isfinite(v):
            return str(v)
        return repr(v) if decimals is None else f"{v:.{decimals}f}"
    return str(value)


def write_table_csv(path, headers, rows, decimals: int | None = 3) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for row in rows:
            writer.writerow([_cell(v, decimals) if not isinstance(v, str) else v for v in row])


def write_table_markdown(path, headers, rows, decimals: int | None = 3, title: str = "") -> None:
    lines = []
    if title:
        lines.append(f"## {title}")
        lines.append("")
    lines.append("| " + " | ".join(str(h) for h in headers) + " |")
    lines.append("|" + "|".join(" --- " for _ in headers) + "|")
    for row in rows:
        cells = [v if isinstance(v, str) else _cell(v, decimals) for v in row]
        lines.append("| " + " | ".join(cells) + " |")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_series_csv(path, dates, columns: dict[str, np.ndarray]) -> None:
    """Full-precision data file: one date column plus named numeric columns."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + names)
        for i, d in enumerate(dates):
            writer.writerow([str(d)] + [repr(float(a[i])) for a in arrays])


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(path, payload: dict) -> None:
    def default(obj):
        if isinstance(obj, np.ndarray):
            return [float(v) for v in obj]
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        return str(obj)

    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2, default=default) + "\n",
        encoding="utf-8",
    )


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    matplotlib.rcParams["svg.hashsalt"] = "garchkit"
    import matplotlib.pyplot as plt

    return plt


def plot_series(path, dates, values, title: str, ylabel: str = "% per day") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(np.asarray(dates, dtype="datetime64[D]"), values, lw=0.7, color="#1f4e79")
    ax.axhline(0.0, lw=0.5, color="grey")
    ax.set_title(title)
    ax.set_xlabel("date")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_acf(path, lags, acf_returns, acf_squared, band: float, title: str) -> None:
    """Two-panel autocorrelation chart with the +-1.96/sqrt(T) band drawn."""
    plt = _pyplot()
    fig, axes = plt.subplots(2, 1, figsize=(9, 5.4), sharex=True)
    for ax, values, label in (
        (axes[0], acf_returns, "returns"),
        (axes[1], acf_squared, "squared returns"),
    ):
        ax.bar(lags, values, width=0.6, color="#1f4e79")
        ax.axhline(band, lw=0.8, ls="--", color="firebrick")
        ax.axhline(-band, lw=0.8, ls="--", color="firebrick")
        ax.axhline(0.0, lw=0.5, color="grey")
        ax.set_ylabel(f"ACF ({label})")
    axes[0].set_title(title)
    axes[1].set_xlabel("lag")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def toolkit_version() -> str:
    return __version__
