"""Figure rendering for simulation reports.

Figures are written next to the delimited trace output; the CSV remains the
machine-readable contract and these renderings exist for quick visual review.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_trace_figures"]

plt.rcParams["figure.figsize"] = (7.0, 4.2)
plt.rcParams["font.size"] = 9
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3
plt.rcParams["lines.linewidth"] = 1.0


def _decimate(times, values, max_points=4000):
    if times.shape[0] <= max_points:
        return times, values
    idx = np.linspace(0, times.shape[0] - 1, max_points).astype(int)
    return times[idx], values[idx]


def render_trace_figures(trace, out_prefix, n_plant=None, bounds=None, target=None):
    """Write states/inputs/storage figures for one trace.

    Returns the list of written paths. ``n_plant`` limits the state figure to
    the plant block; ``bounds`` draws the saturation intervals as dotted
    lines; ``target`` draws the per-channel setpoints.
    """
    paths = []
    n_plant = n_plant or trace.states.shape[1]

    fig, ax = plt.subplots()
    for i in range(n_plant):
        t, v = _decimate(trace.times, trace.states[:, i])
        label = trace.labels[i] if i < len(trace.labels) else f"x{i+1}"
        ax.plot(t, v, label=label)
    if target is not None:
        for i, val in enumerate(np.atleast_1d(target)[:n_plant]):
            ax.axhline(val, color="k", linestyle=":", linewidth=0.6)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("state")
    ax.legend(loc="best", fontsize=8)
    path = f"{out_prefix}.states.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots()
    for j in range(trace.inputs.shape[1]):
        t, v = _decimate(trace.times, trace.inputs[:, j])
        ax.plot(t, v, label=f"u{j+1}")
    if bounds is not None:
        for lo, hi in np.atleast_2d(bounds):
            ax.axhline(lo, color="r", linestyle=":", linewidth=0.6)
            ax.axhline(hi, color="r", linestyle=":", linewidth=0.6)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("input")
    ax.legend(loc="best", fontsize=8)
    path = f"{out_prefix}.inputs.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots()
    t, v = _decimate(trace.times, trace.storage)
    ax.plot(t, v, color="tab:purple")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("closed-loop storage")
    path = f"{out_prefix}.storage.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    paths.append(path)
    return paths
