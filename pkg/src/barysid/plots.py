"""Report figures rendered to files alongside the CSV tables.

Uses the Agg backend; nothing here opens a window.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_bode_figure", "save_sweep_figure"]

_TWO_PI = 2.0 * math.pi


def save_bode_figure(
    path,
    omegas,
    plant_vals,
    model_vals=None,
    interp_points=None,
    title=None,
):
    """Magnitude/phase Bode plot (frequency axis in Hz).

    `interp_points` marks measured (omega, complex value) samples the way
    the campaign saw them.
    """
    f = np.asarray(omegas) / _TWO_PI
    fig, (ax_mag, ax_ph) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    ax_mag.loglog(f, np.abs(plant_vals), "k-", lw=1.0, label="plant")
    ax_ph.semilogx(f, np.unwrap(np.angle(plant_vals)), "k-", lw=1.0)
    if model_vals is not None:
        ax_mag.loglog(f, np.abs(model_vals), "r-", lw=0.9, label="model")
        ax_ph.semilogx(f, np.unwrap(np.angle(model_vals)), "r-", lw=0.9)
    if interp_points:
        pw = np.array([p[0] for p in interp_points]) / _TWO_PI
        pv = np.array([p[1] for p in interp_points])
        ax_mag.plot(pw, np.abs(pv), "o", ms=4, mfc="none", mec="b",
                    label="experiments")
        ax_ph.plot(pw, np.angle(pv), "o", ms=4, mfc="none", mec="b")
    ax_mag.set_ylabel("|G|")
    ax_ph.set_ylabel("phase [rad]")
    ax_ph.set_xlabel("frequency [Hz]")
    ax_mag.grid(True, which="both", alpha=0.3)
    ax_ph.grid(True, which="both", alpha=0.3)
    ax_mag.legend(loc="best", fontsize=8)
    if title:
        ax_mag.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(path, orders, series: dict, ylabel: str, title=None):
    """Error norm against model order for each named sweep column."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, values in series.items():
        vals = np.asarray(values, dtype=float)
        ax.semilogy(orders, vals, "o-", ms=4, label=label)
    ax.set_xlabel("model order (states)")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
