#!/usr/bin/env python3
"""Optional plots of the CSVs written by the other scripts (needs matplotlib).

    python3 scripts/plot_results.py results/
"""
from __future__ import annotations

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read(path: Path) -> list[dict[str, str]]:
    with path.open() as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def plot_sweep(path: Path) -> None:
    series = defaultdict(list)
    for row in _read(path):
        if row["mse"] != "nan":
            series[row["param"]].append((float(row["axis_value"]), float(row["mse"]), float(row["mse_err"])))
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, pts in series.items():
        x, y, e = zip(*sorted(pts))
        ax.errorbar(x, y, yerr=e, marker="o", ms=3, label=name)
    ax.set_yscale("log")
    if "delta" in path.stem:
        ax.set_xscale("log")
    ax.set_xlabel(path.stem.split("_")[1])
    ax.set_ylabel("MSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=120)
    plt.close(fig)


def plot_convergence(path: Path) -> None:
    series = defaultdict(list)
    truth = {}
    for row in _read(path):
        series[row["param"]].append((int(row["n"]), float(row["estimate"]), float(row["stderr"])))
        truth[row["param"]] = float(row["truth"])
    fig, axes = plt.subplots(1, len(series), figsize=(3 * len(series), 3))
    for ax, (name, pts) in zip(axes, series.items()):
        n, est, se = map(list, zip(*pts))
        ax.fill_between(n, [a - b for a, b in zip(est, se)], [a + b for a, b in zip(est, se)], alpha=0.3)
        ax.plot(n, est)
        ax.axhline(truth[name], color="k", lw=0.8)
        ax.set_xscale("log")
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=120)
    plt.close(fig)


def main() -> None:
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
    for path in sorted(root.glob("sweep_*.csv")):
        plot_sweep(path)
    for path in sorted(root.glob("convergence*.csv")):
        plot_convergence(path)


if __name__ == "__main__":
    main()
