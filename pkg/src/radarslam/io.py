"""Delimited output: per-step logs, snapshot tables and Monte Carlo metrics.

Floats are written with ``repr`` so a given run always produces identical bytes.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .landmarks import detections_to_array, to_global
from .metrics import METRIC_FIELDS, MonteCarloSummary, RunMetrics
from .simulator import FrameTruth, Scene
from .slam import StepLog
from .state import Pose

LOG_COLUMNS = [
    "k", "true_x", "true_y", "true_theta", "prior_x", "prior_y", "prior_theta",
    "post_x", "post_y", "post_theta", "n_landmarks", "landmarks", "included", "removed", "merged",
    "n_detections", "n_sifted", "n_remaining", "n_clusters", "n_noise", "n_associated",
]
SNAPSHOT_COLUMNS = ["k", "kind", "id", "x", "y"]


def _f(x: float) -> str:
    return repr(float(x))


def _pose_cells(p: Pose | None) -> list[str]:
    return ["", "", ""] if p is None else [_f(v) for v in p]


def log_row(log: StepLog) -> list[str]:
    marks = ";".join(f"{lid}:{_f(x)}:{_f(y)}" for lid, (x, y) in zip(log.landmark_ids, log.landmark_positions))
    return [
        str(log.k), *_pose_cells(log.true_pose), *_pose_cells(log.prior_pose), *_pose_cells(log.posterior_pose),
        str(len(log.landmark_ids)), marks,
        ";".join(f"{lid}:{rule}" for lid, rule in log.included),
        ";".join(str(lid) for lid in log.removed),
        ";".join(f"{a}:{b}" for a, b in log.merged),
        str(log.n_detections), str(log.n_sifted), str(log.n_remaining),
        str(log.n_clusters), str(log.n_noise), str(log.n_associated),
    ]


def logs_to_csv(logs: Iterable[StepLog]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for log in logs:
        w.writerow(log_row(log))
    return buf.getvalue()


def write_log(logs: Iterable[StepLog], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(logs_to_csv(logs), encoding="utf-8")
    return path


def _split(cell: str) -> list[str]:
    return [p for p in cell.split(";") if p]


def read_log(path: str | Path) -> list[StepLog]:
    """Parse a file written by :func:`write_log` (update traces are not stored)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != LOG_COLUMNS:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for row in reader:
            def pose(prefix):
                cells = [row[f"{prefix}_{c}"] for c in ("x", "y", "theta")]
                return None if cells[0] == "" else Pose(*(float(c) for c in cells))

            marks = [m.split(":") for m in _split(row["landmarks"])]
            positions = np.array([[float(x), float(y)] for _, x, y in marks]).reshape(-1, 2)
            out.append(StepLog(
                k=int(row["k"]), prior_pose=pose("prior"), posterior_pose=pose("post"),
                landmark_ids=[int(m[0]) for m in marks], landmark_positions=positions,
                included=[(int(a), b) for a, b in (s.split(":") for s in _split(row["included"]))],
                removed=[int(s) for s in _split(row["removed"])],
                merged=[(int(a), int(b)) for a, b in (s.split(":") for s in _split(row["merged"]))],
                n_detections=int(row["n_detections"]), n_sifted=int(row["n_sifted"]),
                n_remaining=int(row["n_remaining"]), n_clusters=int(row["n_clusters"]),
                n_noise=int(row["n_noise"]), n_associated=int(row["n_associated"]),
                true_pose=pose("true")))
    return out


def snapshot_rows(log: StepLog, frame: FrameTruth, scene: Scene) -> list[list[str]]:
    """Rows describing one step: poses, landmark estimates, detections and vehicle outlines.

    Detections are placed in the world with the true pose; ``id`` holds their
    origin (vehicle id or ``clutter``). Vehicle corners share the vehicle id.
    """
    k = str(log.k)
    rows = [[k, "true_pose", "", _f(frame.pose.x), _f(frame.pose.y)],
            [k, "est_pose", "", _f(log.posterior_pose.x), _f(log.posterior_pose.y)]]
    for lid, (x, y) in zip(log.landmark_ids, log.landmark_positions):
        rows.append([k, "landmark", str(lid), _f(x), _f(y)])
    if frame.detections:
        z = detections_to_array(frame.detections)
        pts = to_global(frame.pose, z[:, 0], z[:, 1])
        rows.extend([k, "detection", origin, _f(x), _f(y)] for origin, (x, y) in zip(frame.origins, pts))
    for v in scene.vehicles:
        if v.present(log.k):
            rows.extend([k, "vehicle_corner", v.id, _f(cx), _f(cy)] for cx, cy in v.corners())
    return rows


def write_snapshots(logs: Sequence[StepLog], frames: Sequence[FrameTruth], scene: Scene,
                    steps: Iterable[int], path: str | Path) -> Path:
    by_k = {log.k: (log, fr) for log, fr in zip(logs, frames)}
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_COLUMNS)
        for k in steps:
            if k not in by_k:
                raise ValueError(f"snapshot step {k} outside the run (0..{len(logs) - 1})")
            w.writerows(snapshot_rows(*by_k[k], scene))
    return path


def _cell(v) -> str:
    if isinstance(v, list):
        return ";".join(str(x) for x in v)
    if isinstance(v, float):
        return "" if math.isnan(v) else _f(v)
    return str(v)


def write_run_metrics(summary: MonteCarloSummary, path: str | Path) -> Path:
    """One row per run with every field of ``RunMetrics``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", *METRIC_FIELDS])
        for seed, m in zip(summary.seeds, summary.runs):
            w.writerow([seed, *(_cell(getattr(m, f)) for f in METRIC_FIELDS)])
    return path


def write_summary(summaries: dict[str, MonteCarloSummary], path: str | Path) -> Path:
    """Aggregate table: one row per (scenario, metric) with mean and max where defined."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "metric", "mean", "max", "runs"])
        for name, s in summaries.items():
            for metric, mean, mx in s.rows():
                w.writerow([name, metric, _cell(mean), "" if mx is None else _cell(mx), len(s.runs)])
    return path


def _read_rows(path: str | Path, header: list[str]) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != header:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        return list(reader)


def read_snapshots(path: str | Path) -> list[tuple[int, str, str, float, float]]:
    return [(int(r["k"]), r["kind"], r["id"], float(r["x"]), float(r["y"]))
            for r in _read_rows(path, SNAPSHOT_COLUMNS)]


def _parse_metric(name: str, cell: str):
    if name.endswith("_delays"):
        return [int(x) for x in _split(cell)]
    if name.endswith("_count"):
        return int(cell)
    return math.nan if cell == "" else float(cell)


def read_run_metrics(path: str | Path) -> list[tuple[int, RunMetrics]]:
    out = []
    for r in _read_rows(path, ["seed", *METRIC_FIELDS]):
        out.append((int(r["seed"]), RunMetrics(**{f: _parse_metric(f, r[f]) for f in METRIC_FIELDS})))
    return out


def read_summary(path: str | Path) -> list[tuple[str, str, float, float | None, int]]:
    return [(r["scenario"], r["metric"], math.nan if r["mean"] == "" else float(r["mean"]),
             None if r["max"] == "" else float(r["max"]), int(r["runs"]))
            for r in _read_rows(path, ["scenario", "metric", "mean", "max", "runs"])]
