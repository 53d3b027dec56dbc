"""Matplotlib figures written next to the tabular CLI outputs.

Figures are built on bare :class:`~matplotlib.figure.Figure` objects (no
pyplot state) and saved without a software/date stamp, so identical inputs
give byte-identical PNG files.
"""

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

STYLE = {
    "figsize": (6.4, 4.0),
    "dpi": 100,
}
PNG_METADATA = {"Software": None}


def _new(ncols=1, width_ratios=None, figsize=None):
    fig = Figure(figsize=figsize or STYLE["figsize"], dpi=STYLE["dpi"], layout="constrained")
    axes = fig.subplots(1, ncols, gridspec_kw={"width_ratios": width_ratios} if width_ratios else None)
    return fig, axes


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, format="png", metadata=PNG_METADATA)
    return path


def plot_series(values, node_ids, steps_per_day, path, clusters=None, days=2):
    """First ``days`` days of every node's flow, coloured by cluster when given."""
    span = min(values.shape[0], days * steps_per_day)
    hours = np.arange(span) * 24.0 / steps_per_day
    fig, ax = _new()
    colors = [f"C{c % 10}" for c in clusters] if clusters is not None else [f"C{i % 10}" for i in range(len(node_ids))]
    for j, name in enumerate(node_ids):
        ax.plot(hours, values[:span, j], color=colors[j], lw=0.8, label=name)
    ax.set_xlabel("hours")
    ax.set_ylabel("flow")
    if len(node_ids) <= 12:
        ax.legend(fontsize=6, ncols=2)
    return _save(fig, path)


def plot_loss_curve(records, path):
    """Train and validation loss per epoch on a log scale."""
    epochs = [r["epoch"] for r in records]
    fig, ax = _new()
    ax.plot(epochs, [r["train_loss"] for r in records], marker="o", ms=3, label="train")
    ax.plot(epochs, [r["val_loss"] for r in records], marker="s", ms=3, label="validation")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("Huber loss (normalized)")
    ax.legend()
    return _save(fig, path)


def plot_horizon_metrics(per_horizon, path):
    """MAE and RMSE against forecast horizon."""
    h = [r["horizon"] for r in per_horizon]
    fig, ax = _new()
    ax.plot(h, [r["mae"] for r in per_horizon], marker="o", label="MAE")
    ax.plot(h, [r["rmse"] for r in per_horizon], marker="s", label="RMSE")
    ax.set_xlabel("horizon (steps)")
    ax.set_ylabel("error")
    ax.set_xticks(h)
    ax.legend()
    return _save(fig, path)


def plot_mask(probs, mask, node_ids, path):
    """Connectivity probabilities next to the binary mask."""
    fig, (ax_p, ax_m) = _new(2, figsize=(9.0, 4.0))
    ticks = np.arange(len(node_ids))
    for ax, data, title, cmap in ((ax_p, probs, "probability P", "viridis"), (ax_m, mask, "mask M", "Greys")):
        im = ax.imshow(data, vmin=0.0, vmax=1.0, cmap=cmap, interpolation="nearest")
        ax.set_title(title)
        ax.set_xticks(ticks, node_ids, rotation=90, fontsize=6)
        ax.set_yticks(ticks, node_ids, fontsize=6)
        fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, path)


def plot_node_pairs(flow, node_ids, high, low, path):
    """Input flows of the most and least connected node pairs side by side.

    ``high`` and ``low`` are ``(i, j, p)`` triples; only the first of each is drawn.
    """
    fig, axes = _new(2, figsize=(9.0, 3.6))
    steps = np.arange(flow.shape[0])
    for ax, pairs, title in ((axes[0], high, "highest P"), (axes[1], low, "lowest P")):
        if not pairs:
            ax.set_axis_off()
            continue
        i, j, p = pairs[0]
        ax.plot(steps, flow[:, i], marker="o", ms=3, label=node_ids[i])
        ax.plot(steps, flow[:, j], marker="s", ms=3, label=node_ids[j])
        ax.set_title(f"{title}: {node_ids[i]}-{node_ids[j]} (P={p:.3f})")
        ax.set_xlabel("input step")
        ax.legend(fontsize=7)
    axes[0].set_ylabel("flow")
    return _save(fig, path)
