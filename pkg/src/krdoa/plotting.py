"""Figure rendering for sweep results.

Kept out of the bench on purpose: the CSV is the bench contract, and these
helpers turn a finished result into summary figures on the CLI's report path.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import EnsembleResult

_AXIS_LABELS = {
    "snr": "SNR (dB)",
    "snapshots": "snapshots",
    "size": "sensors per axis",
}


def _by_method(result: EnsembleResult):
    methods = []
    for c in result.cells:
        if c.method not in methods:
            methods.append(c.method)
    for m in methods:
        cells = [c for c in result.cells if c.method == m]
        yield m, cells


def rmse_figure(result: EnsembleResult, path, title=None) -> None:
    """Mean RMSE versus the sweep variable, one curve per method.

    Solid line: ensemble mean. Dotted lines: mean +- one standard deviation
    (the lower band is dropped where it is not positive, the y-axis being
    logarithmic).
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for method, cells in _by_method(result):
        x = np.array([c.sweep_value for c in cells])
        mean = np.array([c.mean_rmse_deg for c in cells])
        std = np.array([c.std_rmse_deg for c in cells])
        line, = ax.semilogy(x, mean, marker="o", label=method)
        color = line.get_color()
        upper = mean + std
        lower = mean - std
        ax.semilogy(x, upper, linestyle=":", linewidth=1.0, color=color)
        ok = lower > 0
        if np.any(ok):
            ax.semilogy(x[ok], lower[ok], linestyle=":", linewidth=1.0, color=color)
    ax.set_xlabel(_AXIS_LABELS.get(result.sweep_axis, result.sweep_axis))
    ax.set_ylabel("RMSE (deg)")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def timing_figure(result: EnsembleResult, path, title=None) -> None:
    """Median per-call time versus the sweep variable, p10/p90 dotted."""
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for method, cells in _by_method(result):
        x = np.array([c.sweep_value for c in cells])
        med = np.array([c.median_s for c in cells], dtype=float)
        p10 = np.array([c.p10_s for c in cells], dtype=float)
        p90 = np.array([c.p90_s for c in cells], dtype=float)
        line, = ax.semilogy(x, med, marker="o", label=method)
        color = line.get_color()
        ax.semilogy(x, p10, linestyle=":", linewidth=1.0, color=color)
        ax.semilogy(x, p90, linestyle=":", linewidth=1.0, color=color)
    ax.set_xlabel(_AXIS_LABELS.get(result.sweep_axis, result.sweep_axis))
    ax.set_ylabel("time per call (s)")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figure(result: EnsembleResult, csv_path, title=None) -> str:
    """Render the figure matching a result next to its CSV; returns the path."""
    import os

    stem, _ = os.path.splitext(os.fspath(csv_path))
    out = stem + ".png"
    has_timing = any(c.median_s is not None for c in result.cells)
    if has_timing:
        timing_figure(result, out, title=title)
    else:
        rmse_figure(result, out, title=title)
    return out
