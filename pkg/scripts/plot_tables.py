"""Plot the tables written by the CLI or run_reference_experiment.py (needs matplotlib)."""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dir", help="directory holding the csv tables")
    args = ap.parse_args()
    d = Path(args.dir)

    for path in sorted(d.glob("dist*_k*.csv")):
        _, rows = read(path)
        plt.figure(figsize=(5, 3))
        plt.bar([r[0] for r in rows], [r[2] for r in rows], width=[r[1] - r[0] for r in rows], align="edge")
        plt.xlabel("distance (EUR)")
        plt.ylabel("runs")
        plt.title(path.stem)
        plt.tight_layout()
        plt.savefig(path.with_suffix(".png"), dpi=120)
        plt.close()

    if (d / "signature.csv").exists():
        _, rows = read(d / "signature.csv")
        plt.figure(figsize=(5, 3))
        plt.plot([r[0] for r in rows], [r[1] for r in rows], "o-")
        plt.xlabel("tau (s)")
        plt.ylabel("C(tau) (EUR^2/h)")
        plt.tight_layout()
        plt.savefig(d / "signature.png", dpi=120)
        plt.close()

    if (d / "intensity.csv").exists():
        header, rows = read(d / "intensity.csv")
        plt.figure(figsize=(5, 3))
        plt.step([r[0] for r in rows], [r[-1] for r in rows], where="post")
        plt.xlabel("time (h)")
        plt.ylabel("mean events per window")
        plt.tight_layout()
        plt.savefig(d / "intensity.png", dpi=120)
        plt.close()


if __name__ == "__main__":
    main()
