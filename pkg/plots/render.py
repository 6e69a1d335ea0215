#!/usr/bin/env python3
"""Render figures from run artifacts.

Reads the CSV/JSON files the transfer toolkit writes and draws the standard
figure set; no physics is recomputed, every plotted number comes verbatim
from an input file.

    render.py --kind trajectory --in path_synodic.csv --out traj.png
    render.py --kind elements   --in elements_history.csv --out elems.png
    render.py --kind angles     --in thrust_angles.csv --out angles.png
    render.py --kind torques    --in torques.csv --out torques.png
    render.py --kind wheels     --in wheels.csv --out wheels.png
    render.py --kind montecarlo --in run_*_elements.csv run_*_qe0.csv --out mc.png
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("trajectory", "elements", "angles", "torques", "wheels", "montecarlo")

EXPECTED = {
    "trajectory": ["epoch_s", "x_km", "y_km", "z_km"],
    "elements": ["epoch_s", "p_km", "e", "i_deg", "a_km"],
    "angles": ["epoch_s", "alpha_rad", "beta_rad"],
    "torques": ["epoch_s", "Tcx", "Tcy", "Tcz", "Tax", "Tay", "Taz"],
    "wheels": ["epoch_s", "ws1", "ws2", "ws3", "ws4", "dws1", "dws2", "dws3", "dws4"],
}


class RenderError(ValueError):
    pass


def load_csv(path, expected: list[str] | None = None):
    path = Path(path)
    if not path.exists():
        raise RenderError(f"input not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise RenderError(f"{path}: empty file")
        if expected is not None and header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise RenderError(
                f"{path}: column mismatch (missing {missing or 'none'}, "
                f"unexpected {extra or 'none'})")
        rows = [[float(c) for c in row] for row in reader if row]
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return header, np.asarray(rows)


def _days(data):
    t = data[:, 0]
    return (t - t[0]) / 86400.0


def render_trajectory(paths, out):
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection="3d")
    for p in paths:
        _, d = load_csv(p, EXPECTED["trajectory"])
        ax.plot(d[:, 1], d[:, 2], d[:, 3], lw=0.6)
    ax.scatter([0.0], [0.0], [0.0], c="0.4", s=40)
    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_zlabel("z [km]")
    ax.set_title("transfer in the Moon-centered rotating frame")
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_elements(paths, out):
    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    for p in paths:
        _, d = load_csv(p, EXPECTED["elements"])
        t = _days(d)
        axes[0].plot(t, d[:, 1], lw=0.8)
        axes[1].plot(t, d[:, 2], lw=0.8)
        axes[2].plot(t, d[:, 3], lw=0.8)
    axes[0].set_ylabel("p [km]")
    axes[1].set_ylabel("e")
    axes[2].set_ylabel("i [deg]")
    axes[2].set_xlabel("time [days]")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_angles(paths, out):
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for p in paths:
        _, d = load_csv(p, EXPECTED["angles"])
        t = _days(d)
        alpha = np.degrees(np.unwrap(d[:, 1]))
        axes[0].plot(t, alpha, lw=0.7)
        axes[1].plot(t, np.degrees(d[:, 2]), lw=0.7)
    axes[0].set_ylabel("alpha [deg]")
    axes[1].set_ylabel("beta [deg]")
    axes[1].set_ylim(-90, 90)
    axes[1].set_xlabel("time [days]")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_torques(paths, out):
    fig, axes = plt.subplots(2, 1, figsize=(7, 5.5), sharex=True)
    for p in paths:
        _, d = load_csv(p, EXPECTED["torques"])
        t = _days(d)
        for j, lab in zip(range(1, 4), "xyz"):
            axes[0].plot(t, d[:, j], lw=0.6, label=f"Tc{lab}")
        for j, lab in zip(range(4, 7), "xyz"):
            axes[1].plot(t, d[:, j], lw=0.6, label=f"Ta{lab}")
    axes[0].set_ylabel("commanded [N m]")
    axes[1].set_ylabel("actual [N m]")
    axes[1].set_xlabel("time [days]")
    for ax in axes:
        ax.legend(loc="upper right", fontsize=7, ncol=3)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_wheels(paths, out):
    fig, ax = plt.subplots(figsize=(7, 4))
    for p in paths:
        _, d = load_csv(p, EXPECTED["wheels"])
        t = _days(d)
        for j in range(1, 5):
            ax.plot(t, d[:, j], lw=0.6, label=f"wheel {j}")
    ax.set_ylabel("wheel rate [deg/s]")
    ax.set_xlabel("time [days]")
    ax.legend(loc="upper right", fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_montecarlo(paths, out):
    elem_files, qe0_files = [], []
    for p in paths:
        with open(p, newline="") as fh:
            header = fh.readline().strip().split(",")
        if header == EXPECTED["elements"]:
            elem_files.append(p)
        elif header == ["epoch_s", "qe0"]:
            qe0_files.append(p)
        else:
            raise RenderError(f"{p}: not an elements or qe0 history")
    if not elem_files and not qe0_files:
        raise RenderError("no usable inputs")
    nrows = (3 if elem_files else 0) + (1 if qe0_files else 0)
    fig, axes = plt.subplots(nrows, 1, figsize=(7, 2.3 * nrows), sharex=False)
    axes = np.atleast_1d(axes)
    k = 0
    if elem_files:
        for p in elem_files:
            _, d = load_csv(p, EXPECTED["elements"])
            t = _days(d)
            axes[0].plot(t, d[:, 1], lw=0.5, alpha=0.6)
            axes[1].plot(t, d[:, 2], lw=0.5, alpha=0.6)
            axes[2].plot(t, d[:, 3], lw=0.5, alpha=0.6)
        axes[0].set_ylabel("p [km]")
        axes[1].set_ylabel("e")
        axes[2].set_ylabel("i [deg]")
        axes[2].set_xlabel("time [days]")
        k = 3
    if qe0_files:
        for p in qe0_files:
            _, d = load_csv(p)
            axes[k].plot((d[:, 0] - d[0, 0]) / 3600.0, d[:, 1], lw=0.5, alpha=0.6)
        axes[k].set_ylabel("qe0")
        axes[k].set_xlabel("time [hours]")
        axes[k].set_ylim(-1.05, 1.05)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


RENDERERS = {
    "trajectory": render_trajectory,
    "elements": render_elements,
    "angles": render_angles,
    "torques": render_torques,
    "wheels": render_wheels,
    "montecarlo": render_montecarlo,
}


def render(kind: str, inputs, out) -> Path:
    """Render one figure kind from its input files; returns the output path."""
    if kind not in RENDERERS:
        raise RenderError(f"unknown kind {kind!r}; choose from {KINDS}")
    if not inputs:
        raise RenderError("no input files given")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    RENDERERS[kind](list(inputs), out)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True,
                    help="input CSV file(s)")
    ap.add_argument("--out", required=True, help="output PNG path")
    args = ap.parse_args(argv)
    try:
        path = render(args.kind, args.inputs, args.out)
    except RenderError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
