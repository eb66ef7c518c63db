"""Figure rendering for map outputs.

Map commands write CSV as the contract; these helpers render a matching
figure next to it.  The Agg backend is forced so the CLI works headless, and
PNG metadata is scrubbed so repeated runs produce identical bytes.
"""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_grid_map(axes_values, values, sensors, path, label: str):
    """Render a 1-D line plot or 2-D heat map of a grid sweep.

    ``axes_values`` is (xs,) or (xs, ys); ``values`` has the matching shape
    (row-major over the first axis).  Sensor locations are overlaid.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.8))
    if len(axes_values) == 1:
        (xs,) = axes_values
        ax.plot(xs, values, color="tab:blue")
        lo, hi = float(np.min(values)), float(np.max(values))
        ax.plot(sensors[:, 0], np.full(len(sensors), lo), "kv", markersize=6)
        ax.set_xlabel("x1")
        ax.set_ylabel(label)
        ax.set_ylim(lo - 0.05 * (hi - lo + 1e-30), hi + 0.05 * (hi - lo + 1e-30))
    elif len(axes_values) == 2:
        xs, ys = axes_values
        mesh = ax.pcolormesh(xs, ys, np.asarray(values).T, shading="auto", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label=label)
        ax.plot(sensors[:, 0], sensors[:, 1], "wo", markersize=5, markeredgecolor="k")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal")
    else:
        raise ValueError("figures are rendered for 1-D and 2-D maps only")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
