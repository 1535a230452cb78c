"""SVG figures from the CSV artifacts of an output directory."""

from __future__ import annotations

import csv
import glob
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except ValueError:
            cols[name] = [r[j] for r in body]
    return cols


def _config_hash(out_dir):
    for path in sorted(glob.glob(os.path.join(out_dir, "report_*.json"))):
        with open(path) as fh:
            return json.load(fh).get("config_hash", "unknown")
    return "unknown"


def _save(fig, path, tag):
    plt.rcParams["svg.hashsalt"] = tag
    fig.text(0.99, 0.01, f"config {tag}", ha="right", va="bottom", fontsize=7, color="0.4")
    fig.savefig(path, format="svg", metadata={"Date": None, "Description": f"config hash {tag}"})
    plt.close(fig)


def plot_psi(out_dir, tag):
    written = []
    for path in sorted(glob.glob(os.path.join(out_dir, "phi_*.csv"))):
        d = _read(path)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(d["z"], d["psi"], lw=1.2)
        ax.set_xlabel("z = r/t")
        ax.set_ylabel("psi(z)")
        ax.set_title(os.path.basename(path)[:-4])
        name = os.path.basename(path)[:-4].replace("phi_", "psi_") + ".svg"
        _save(fig, os.path.join(out_dir, name), tag)
        written.append(name)
    return written


def plot_lambda_track(out_dir, tag):
    path = os.path.join(out_dir, "lambda_track.csv")
    if not os.path.exists(path):
        return []
    d = _read(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(d["t"], d["lambda"], "o-", ms=3, label="lambda(t) extracted")
    ax.plot(d["t"], d["lambda_c"], "--", label="lambda_c(t)")
    ax.set_xlabel("t")
    ax.set_ylabel("scale")
    ax.legend()
    _save(fig, os.path.join(out_dir, "lambda_track.svg"), tag)
    return ["lambda_track.svg"]


def plot_reduced(out_dir, tag):
    written = []
    for path in sorted(glob.glob(os.path.join(out_dir, "reduced_*.csv"))):
        d = _read(path)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.semilogx(d["t"], d["ratio"], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel("lambda |log t|^(1-mu) / t^(nu+1)")
        ax.set_title(os.path.basename(path)[:-4])
        name = os.path.basename(path)[:-4] + "_ratio.svg"
        _save(fig, os.path.join(out_dir, name), tag)
        written.append(name)
    return written


def emit_plots(out_dir):
    """Write every figure whose inputs exist; return (written, missing)."""
    tag = _config_hash(out_dir)
    written, missing = [], []
    for fn, needs in ((plot_psi, "phi_*.csv"), (plot_lambda_track, "lambda_track.csv"),
                      (plot_reduced, "reduced_*.csv")):
        got = fn(out_dir, tag)
        if got:
            written.extend(got)
        else:
            missing.append(needs)
    return written, missing
