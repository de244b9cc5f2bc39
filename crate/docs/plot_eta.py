"""Plot the accomplishment curve and, if present, the Monte Carlo band.

usage: python docs/plot_eta.py OUT_DIR [figure.png]
"""

import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def main():
    out = Path(sys.argv[1])
    fig, ax = plt.subplots(figsize=(7, 4))
    eta = rows(out / "eta.csv")
    ax.plot([float(r["t"]) for r in eta], [float(r["eta"]) for r in eta], label="predicted eta")
    band = out / "validation.csv"
    if band.exists():
        v = rows(band)
        n = int(rows(out / "targets.csv")[-1]["index"]) + 1
        t = [float(r["t"]) for r in v]
        ax.fill_between(t, [int(r["lo"]) / n for r in v], [int(r["hi"]) / n for r in v], alpha=0.3, label="binomial band")
        ax.plot(t, [float(r["fraction"]) for r in v], label="detected fraction")
    ax.set_xlabel("mission time [s]")
    ax.set_ylabel("probability")
    ax.legend()
    fig.tight_layout()
    if len(sys.argv) > 2:
        fig.savefig(sys.argv[2], dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
