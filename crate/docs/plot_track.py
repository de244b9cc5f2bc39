"""Plot flight tracks over the final coverage field, and altitude above ground.

usage: python docs/plot_track.py OUT_DIR [figure.png]
"""

import csv
import json
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def read_pgm(path):
    data = path.read_bytes()
    parts = data.split(maxsplit=3)
    width, height = int(parts[1]), int(parts[2])
    return np.frombuffer(data[-width * height :], dtype=np.uint8).reshape(height, width)


def main():
    out = Path(sys.argv[1])
    meta = json.loads((out / "coverage.json").read_text())
    image = read_pgm(out / "coverage.pgm")
    x0, y0, s = meta["x_origin"], meta["y_origin"], meta["cell_size"]
    extent = [x0, x0 + s * meta["ncols"], y0, y0 + s * meta["nrows"]]
    fig, (top, side) = plt.subplots(1, 2, figsize=(12, 5))
    top.imshow(image, extent=extent, cmap="gray")
    for log in sorted(out.glob("flight*_log.csv")):
        with open(log, newline="") as f:
            r = list(csv.DictReader(f))
        top.plot([float(v["x"]) for v in r], [float(v["y"]) for v in r], lw=0.8, label=log.stem)
        side.plot([float(v["mission_t"]) for v in r], [float(v["z"]) - float(v["ground"]) for v in r], lw=0.8)
    top.set_aspect("equal")
    top.legend()
    side.set_xlabel("mission time [s]")
    side.set_ylabel("height above ground [m]")
    fig.tight_layout()
    if len(sys.argv) > 2:
        fig.savefig(sys.argv[2], dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
