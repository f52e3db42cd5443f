"""Figures for runs and Monte Carlo batches, rendered straight to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Circle, Polygon

from .landmarks import detections_to_array, to_global
from .metrics import MonteCarloSummary
from .simulator import CLUTTER, FrameTruth, Scene
from .slam import StepLog

# fixed metadata keeps PNG bytes stable between identical runs
_PNG_META = {"Software": None}


def _draw_step(ax, scene: Scene, logs: Sequence[StepLog], frame: FrameTruth, k: int) -> None:
    log = logs[k]
    for v in scene.vehicles:
        here = v.present(k)
        ax.add_patch(Polygon(v.corners(), closed=True, fill=here, alpha=0.35 if here else 1.0,
                             facecolor="0.6", edgecolor="0.3", linestyle="-" if here else ":"))
    true = np.array([lg.true_pose[:2] for lg in logs[:k + 1]])
    est = np.array([lg.posterior_pose[:2] for lg in logs[:k + 1]])
    ax.plot(true[:, 0], true[:, 1], "k-", lw=1, label="true path")
    ax.plot(est[:, 0], est[:, 1], "b--", lw=1, label="estimated path")
    if frame.detections:
        z = detections_to_array(frame.detections)
        pts = to_global(frame.pose, z[:, 0], z[:, 1])
        clutter = np.array([o == CLUTTER for o in frame.origins])
        ax.plot(pts[~clutter, 0], pts[~clutter, 1], ".", color="tab:green", ms=4, label="vehicle returns")
        ax.plot(pts[clutter, 0], pts[clutter, 1], ".", color="tab:red", ms=4, label="clutter")
    if len(log.landmark_positions):
        ax.plot(log.landmark_positions[:, 0], log.landmark_positions[:, 1], "x", color="tab:blue",
                ms=8, mew=2, label="landmarks")
    p = log.posterior_pose
    ax.add_patch(Circle((p.x, p.y), scene.r_max, fill=False, ls=":", color="tab:blue", lw=0.8))
    ax.set_title(f"k = {k}")
    ax.set_aspect("equal")


def snapshot_figure(scene: Scene, logs: Sequence[StepLog], frames: Sequence[FrameTruth],
                    steps: Sequence[int], path: str | Path) -> Path:
    """One panel per requested step showing vehicles, detections, landmarks and paths."""
    steps = list(steps)
    ncols = min(len(steps), 3)
    nrows = -(-len(steps) // ncols)
    fig = Figure(figsize=(5.5 * ncols, 5 * nrows))
    axes = fig.subplots(nrows, ncols, squeeze=False)
    centers = np.array([v.center for v in scene.vehicles])
    path_xy = np.array([lg.true_pose[:2] for lg in logs])
    pts = np.vstack([centers, path_xy])
    lo, hi = pts.min(axis=0) - 5, pts.max(axis=0) + 5
    for ax, k in zip(axes.flat, steps):
        _draw_step(ax, scene, logs, frames[k], k)
        ax.set_xlim(lo[0], hi[0])
        ax.set_ylim(lo[1], hi[1])
    for ax in list(axes.flat)[len(steps):]:
        ax.axis("off")
    axes.flat[0].legend(loc="upper left", fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    return path


def metrics_figure(summaries: dict[str, MonteCarloSummary], path: str | Path) -> Path:
    """Per-run distributions of the headline metrics, one box per scenario."""
    panels = [
        ("platform_position_rmse", "position RMSE [m]"),
        ("platform_heading_rmse", "heading RMSE [deg]"),
        ("landmark_mae", "landmark MAE [m]"),
        ("inclusion_delay", "mean inclusion delay [frames]"),
        ("removal_delay", "mean removal delay [frames]"),
        ("false_landmark_count", "false landmarks"),
        ("missed_landmark_count", "missed landmarks"),
    ]
    names = list(summaries)
    fig = Figure(figsize=(16, 7))
    axes = fig.subplots(2, 4)
    for ax, (attr, label) in zip(axes.flat, panels):
        data = []
        for n in names:
            vals = np.array([getattr(r, attr) for r in summaries[n].runs], dtype=float)
            data.append(vals[np.isfinite(vals)])
        ax.boxplot(data)
        ax.set_xticks(range(1, len(names) + 1), names)
        ax.set_title(label, fontsize=10)
        ax.tick_params(axis="x", labelsize=8)
    axes.flat[-1].axis("off")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    return path
