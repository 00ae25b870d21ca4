"""Render sweep summaries and MLE spectra written by the stars-isac CLI as SVG.

    python scripts/plot_sweeps.py OUT_DIR [--dest FIGURE_DIR]

Every sweep_<axis>_summary.csv becomes <axis>.svg (mean root CRB against the
swept value, one line per model) and every spectrum_<model>.csv becomes
spectrum_<model>.svg.  Needs matplotlib (pip install -e .[plot]).
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

AXIS_LABELS = {
    "gamma_bar": "SINR threshold (dB)",
    "N": "STARS elements N",
    "N_s": "sensor elements N_s",
    "split": "STARS elements N (fixed total)",
}


def plot_summary(path: Path, dest: Path):
    axis = path.name[len("sweep_"):-len("_summary.csv")]
    series = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            series.setdefault(row["model"], []).append(
                (float(row["axis_value"]), float(row["mean_root_crb_deg"])))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for model, pts in series.items():
        x, y = zip(*sorted(pts))
        ax.plot(x, y, marker="o", label=model.replace("_", " "))
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("root CRB (deg)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = dest / f"{axis}.svg"
    fig.savefig(out)
    plt.close(fig)
    return out


def plot_spectrum(path: Path, dest: Path):
    az, el, vals = _read_grid(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    mesh = ax.pcolormesh(az, el, vals, shading="auto")
    fig.colorbar(mesh, ax=ax, label="normalized likelihood")
    ax.set_xlabel("azimuth (deg)")
    ax.set_ylabel("elevation (deg)")
    fig.tight_layout()
    out = dest / (path.stem + ".svg")
    fig.savefig(out)
    plt.close(fig)
    return out


def _read_grid(path):
    # first row holds azimuths, first column elevations, both in degrees
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    az = np.array([float(v) for v in rows[0][1:]])
    el = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return az, el, vals


def main(argv=None):
    ap = argparse.ArgumentParser(description="plot stars-isac CSV outputs as SVG")
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--dest", type=Path, default=None, help="figure directory (default OUT_DIR/figures)")
    args = ap.parse_args(argv)
    dest = args.dest or args.out_dir / "figures"
    dest.mkdir(parents=True, exist_ok=True)
    made = [plot_summary(p, dest) for p in sorted(args.out_dir.glob("sweep_*_summary.csv"))]
    made += [plot_spectrum(p, dest) for p in sorted(args.out_dir.glob("spectrum_*.csv"))]
    for p in made:
        print(p)
    if not made:
        print(f"no sweep summaries or spectra found in {args.out_dir}")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
