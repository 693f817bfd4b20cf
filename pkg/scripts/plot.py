"""Reference plotting recipe for metrics.csv (worker counts) and energy.csv
(cumulative excess energy). Needs matplotlib, which the package itself does
not depend on.

    python scripts/plot.py runs/desk/metrics.csv runs/desk/energy.csv -o runs/desk
"""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_columns(path):
    with open(path) as fh:
        reader = csv.DictReader(fh)
        cols = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, value in row.items():
                cols[name].append(float(value))
    return cols


def plot_workers(metrics, out):
    hours = [t / 3600 for t in metrics["t"]]
    fig, ax = plt.subplots(figsize=(10, 3.5))
    ax.stackplot(hours, metrics["busy"], metrics["idle"], labels=["busy", "idle"], alpha=0.8)
    ax.plot(hours, metrics["cold_starts"], lw=0.5, color="k", label="new")
    ax.axhline(max(metrics["total"]), ls="--", color="grey", label="min. capacity")
    ax.set_xlabel("time [h]")
    ax.set_ylabel("workers")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out / "workers.png", dpi=150)


def plot_energy(energy, out):
    hours = [t / 3600 for t in energy["t"]]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, values in energy.items():
        if name.endswith("_cum_j"):
            ax.plot(hours, [v / 3.6e9 for v in values], label=name[: -len("_cum_j")])
    ax.set_xlabel("time [h]")
    ax.set_ylabel("cumulative excess energy [MWh]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "energy.png", dpi=150)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("metrics", type=Path)
    parser.add_argument("energy", type=Path)
    parser.add_argument("-o", "--out", type=Path, default=Path("."))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    plot_workers(read_columns(args.metrics), args.out)
    plot_energy(read_columns(args.energy), args.out)


if __name__ == "__main__":
    main()
