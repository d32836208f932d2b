"""Figure rendering for run outputs.  The output format follows the file suffix (svg, png, pdf)."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp keep SVG output stable across runs
matplotlib.rcParams["svg.hashsalt"] = "rpusim"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if path.suffix.lower() == ".svg" else None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)
    return path


def plot_learning_curves(series: Dict[str, Tuple[Sequence[float], Sequence[float]]], path,
                         ylabel: str = "test error (%)", log_y: bool = False) -> Path:
    """One line per label; ``series[label] = (epochs, values)``."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, (epochs, values) in series.items():
        ax.plot(epochs, values, marker="o", markersize=3, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    if log_y:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_pulse_response(curves: Dict[str, Sequence[float]], path) -> Path:
    """Weight against pulse number for several device types."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, w in curves.items():
        ax.plot(range(len(w)), w, linewidth=1, label=label)
    ax.set_xlabel("pulse number")
    ax.set_ylabel("weight")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_symmetry_drive(traces, path) -> Path:
    """Distance to the symmetry point against alternating pulse pair number, one line per device."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for trace in traces:
        ax.plot(range(len(trace)), trace, linewidth=1)
    ax.axhline(0.0, color="black", linewidth=0.5)
    ax.set_xlabel("pulse pair")
    ax.set_ylabel("w - w_s")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_histogram(values, path, xlabel: str, bins: int = 50) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.hist(values, bins=bins)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("devices")
    fig.tight_layout()
    return _save(fig, path)
