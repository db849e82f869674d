"""Plot emission: standalone SVG files with CSV data siblings.

Every plot function writes one SVG plus a sibling CSV holding the plotted
numbers, and returns the written paths. Figures are rendered without
timestamps or random hash salts so identical inputs give byte-identical
files.
"""

from __future__ import annotations

import os

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "batchwise"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path: str) -> str:
    fig.savefig(path, **SAVE_KWARGS)
    plt.close(fig)
    return path


def _sibling_csv(path: str) -> str:
    return os.path.splitext(path)[0] + ".csv"


def _overlay(ax, x, curves: dict[str, np.ndarray], title: str) -> None:
    for batch_id, y in curves.items():
        ax.plot(x, y, linewidth=0.8, alpha=0.7, label=batch_id)
    ax.set_title(title, fontsize=10)
    ax.tick_params(labelsize=8)


def alignment_compare_plot(panels: dict[str, tuple[np.ndarray, dict[str, np.ndarray]]],
                           tag: str, path: str) -> list[str]:
    """Write a side-by-side panel of alignment methods for one tag.

    Parameters
    ----------
    panels : dict
        Panel title to ``(x, curves)`` where ``curves`` maps batch id to a
        y-array over ``x``. Typically four panels: unaligned plus one per
        alignment method.
    tag : str
        Tag name, used in the figure title.
    path : str
        Output SVG path.

    Returns
    -------
    list of str
        The SVG path and its sibling CSV path.
    """
    n = len(panels)
    ncols = 2 if n > 1 else 1
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.0 * ncols, 3.0 * nrows),
                             squeeze=False)
    rows = []
    for k, (title, (x, curves)) in enumerate(panels.items()):
        ax = axes[k // ncols][k % ncols]
        _overlay(ax, x, curves, title)
        for batch_id, y in curves.items():
            rows.append(pd.DataFrame({
                "panel": title, "batch_id": batch_id, "x": x, "value": y}))
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.suptitle(f"Alignment comparison: {tag}", fontsize=12)
    fig.tight_layout()
    csv_path = _sibling_csv(path)
    pd.concat(rows, ignore_index=True).to_csv(csv_path, index=False)
    return [_save(fig, path), csv_path]


def control_chart_plot(points: np.ndarray, limit: float, labels, path: str,
                       title: str = "Control chart",
                       center: float | None = None,
                       lower: float | None = None) -> list[str]:
    """Write a control chart: one point per batch with the control limit."""
    points = np.asarray(points, dtype=float)
    labels = [str(x) for x in labels]
    flags = points > limit
    if lower is not None:
        flags = flags | (points < lower)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(points)), 3.5))
    idx = np.arange(len(points))
    ax.plot(idx, points, "-o", markersize=4, color="tab:blue", zorder=2)
    ax.plot(idx[flags], points[flags], "o", markersize=6, color="tab:red", zorder=3)
    ax.axhline(limit, color="tab:red", linestyle="--", linewidth=1.0)
    if lower is not None:
        ax.axhline(lower, color="tab:red", linestyle="--", linewidth=1.0)
    if center is not None:
        ax.axhline(center, color="tab:gray", linestyle=":", linewidth=1.0)
    ax.set_xticks(idx)
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_title(title, fontsize=11)
    fig.tight_layout()
    csv_path = _sibling_csv(path)
    pd.DataFrame({"batch_id": labels, "statistic": points,
                  "limit": limit, "flagged": flags}).to_csv(csv_path, index=False)
    return [_save(fig, path), csv_path]


def heatmap_plot(table: pd.DataFrame, path: str,
                 title: str = "Contribution heatmap") -> list[str]:
    """Write a batches-by-features heatmap with a symmetric color scale."""
    values = table.to_numpy(dtype=float)
    span = float(np.nanmax(np.abs(values))) if values.size else 1.0
    span = span or 1.0
    fig, ax = plt.subplots(figsize=(max(6.0, 0.3 * table.shape[1]),
                                    max(3.5, 0.3 * table.shape[0])))
    mesh = ax.pcolormesh(values, cmap="RdBu_r", vmin=-span, vmax=span)
    ax.set_xticks(np.arange(table.shape[1]) + 0.5)
    ax.set_xticklabels([str(c) for c in table.columns], rotation=90, fontsize=6)
    ax.set_yticks(np.arange(table.shape[0]) + 0.5)
    ax.set_yticklabels([str(i) for i in table.index], fontsize=7)
    fig.colorbar(mesh, ax=ax, shrink=0.8)
    ax.set_title(title, fontsize=11)
    fig.tight_layout()
    csv_path = _sibling_csv(path)
    table.to_csv(csv_path)
    return [_save(fig, path), csv_path]


def fpca_plot(model, path: str) -> list[str]:
    """Write eigenfunctions and the explained-variance profile of one model."""
    from .fpca import explained_variance

    fractions, cumulative = explained_variance(model)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.0, 3.5))
    grid = model.grid.points
    for k in range(model.n_components):
        ax1.plot(grid, model.eigenfunctions[k], linewidth=1.2,
                 label=f"FPC{k + 1}")
    ax1.axhline(0.0, color="tab:gray", linewidth=0.6)
    ax1.set_title(f"Eigenfunctions: {model.tag}" if model.tag else "Eigenfunctions",
                  fontsize=10)
    if model.n_components:
        ax1.legend(fontsize=7)
    ks = np.arange(1, len(fractions) + 1)
    ax2.bar(ks, fractions, color="tab:blue", alpha=0.7)
    ax2.plot(ks, cumulative, "-o", color="tab:orange", markersize=4)
    ax2.set_ylim(0, 1.05)
    ax2.set_title("Explained variance", fontsize=10)
    fig.tight_layout()
    csv_path = _sibling_csv(path)
    frame = pd.DataFrame(model.eigenfunctions.T if model.n_components else
                         np.empty((len(grid), 0)),
                         columns=[f"FPC{k + 1}" for k in range(model.n_components)])
    frame.insert(0, "grid_value", grid)
    frame.insert(1, "mean_curve", model.mean_curve)
    frame.to_csv(csv_path, index=False)
    return [_save(fig, path), csv_path]
