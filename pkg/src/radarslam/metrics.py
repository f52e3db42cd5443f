"""Run metrics (pose RMSE, landmark MAE, delays, false/missed counts) and Monte Carlo aggregation."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .simulator import Scene, VehicleTruth
from .slam import RunResult, SlamConfig, StepLog, run
from .state import Pose, wrap_angle

MATCH_RADIUS = 2.5


@dataclass
class RunMetrics:
    platform_position_rmse: float
    platform_heading_rmse: float
    landmark_mae: float
    inclusion_delays: list[int] = field(default_factory=list)
    removal_delays: list[int] = field(default_factory=list)
    false_landmark_count: int = 0
    missed_landmark_count: int = 0

    @property
    def inclusion_delay(self) -> float:
        return float(np.mean(self.inclusion_delays)) if self.inclusion_delays else math.nan

    @property
    def removal_delay(self) -> float:
        return float(np.mean(self.removal_delays)) if self.removal_delays else math.nan


@dataclass
class Matching:
    matches: list[tuple[int, str]]
    false: list[int]
    missed: list[str]


def pose_errors(logs: Sequence[StepLog], truth: Sequence[Pose]) -> tuple[float, float]:
    """Position RMSE (m) and heading RMSE (deg) of the posterior poses."""
    est = np.array([log.posterior_pose for log in logs], dtype=float)
    ref = np.array(truth, dtype=float)
    if est.shape != ref.shape:
        raise ValueError("logs and truth differ in length")
    pos = np.sqrt(np.mean(np.sum((est[:, :2] - ref[:, :2]) ** 2, axis=1)))
    head = np.sqrt(np.mean(wrap_angle(est[:, 2] - ref[:, 2]) ** 2))
    return float(pos), float(np.rad2deg(head))


def landmark_matching(estimates: np.ndarray, vehicles: Sequence[VehicleTruth], match_radius: float = MATCH_RADIUS,
                      in_range: Iterable[str] | None = None) -> Matching:
    """Greedy nearest-first one-to-one matching of landmark estimates to vehicles.

    Distance is point-to-rectangle (zero inside); ties are broken by distance
    to the rectangle centre, then by index. Unmatched estimates are false;
    unmatched vehicles listed in ``in_range`` (default: all) are missed.
    """
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    pairs = []
    for vi, v in enumerate(vehicles):
        if len(estimates) == 0:
            break
        d = v.distance(estimates)
        dc = np.linalg.norm(estimates - np.asarray(v.center), axis=1)
        for ei in np.flatnonzero(d <= match_radius):
            pairs.append((d[ei], dc[ei], int(ei), vi))
    pairs.sort()
    used_e, used_v, matches = set(), set(), []
    for _, _, ei, vi in pairs:
        if ei in used_e or vi in used_v:
            continue
        used_e.add(ei)
        used_v.add(vi)
        matches.append((ei, vehicles[vi].id))
    matched_ids = {vid for _, vid in matches}
    wanted = [v.id for v in vehicles] if in_range is None else list(in_range)
    false = [i for i in range(len(estimates)) if i not in used_e]
    missed = [vid for vid in wanted if vid not in matched_ids]
    return Matching(sorted(matches), false, missed)


def _in_range(scene: Scene, k: int, pose: Pose) -> list[VehicleTruth]:
    return [v for v in scene.vehicles
            if v.present(k) and math.dist(v.center, pose[:2]) <= scene.r_max]


def _step_matches(logs: Sequence[StepLog], scene: Scene, truth: Sequence[Pose],
                  match_radius: float) -> list[dict[int, str]]:
    """Per step: landmark id -> matched vehicle id."""
    out = []
    for log in logs:
        present = [v for v in scene.vehicles if v.present(log.k)]
        m = landmark_matching(log.landmark_positions, present, match_radius)
        out.append({log.landmark_ids[ei]: vid for ei, vid in m.matches})
    return out


def _lifetimes(logs: Sequence[StepLog]) -> tuple[dict[int, int], dict[int, int]]:
    """Birth step and end step (removal or merge) per landmark id."""
    gone_at: dict[int, int] = {}
    born_at: dict[int, int] = {}
    for log in logs:
        for lid, _ in log.included:
            born_at[lid] = log.k
        for lid in log.removed:
            gone_at[lid] = log.k
        for _, lid in log.merged:
            gone_at.setdefault(lid, log.k)
    return born_at, gone_at


def departure_removals(logs: Sequence[StepLog], scene: Scene, truth: Sequence[Pose],
                       match_radius: float = MATCH_RADIUS,
                       matches: list[dict[int, str]] | None = None) -> dict[str, int | None]:
    """Removal delay per departing vehicle, or ``None`` if it cannot be measured.

    The delay counts in-range steps, starting with the first step the empty
    location is back within range, up to and including the removal step.
    ``None`` means the vehicle never had a landmark before leaving, its spot
    never came back into range, or the landmark outlived the run.
    """
    matches = _step_matches(logs, scene, truth, match_radius) if matches is None else matches
    _, gone_at = _lifetimes(logs)
    out: dict[str, int | None] = {}
    for v in scene.vehicles:
        if math.isinf(v.departure):
            continue
        out[v.id] = None
        before = [m for i, m in enumerate(matches) if logs[i].k < v.departure]
        owner = next((lid for m in reversed(before) for lid, vid in m.items() if vid == v.id), None)
        if owner is None:
            continue
        back = next((logs[i].k for i in range(len(logs))
                     if logs[i].k >= v.departure and math.dist(v.center, truth[i][:2]) <= scene.r_max), None)
        removed = gone_at.get(owner)
        if back is None or removed is None or removed < back:
            continue
        out[v.id] = removed - back + 1
    return out


def delays(logs: Sequence[StepLog], scene: Scene, truth: Sequence[Pose],
           match_radius: float = MATCH_RADIUS) -> tuple[list[int], list[int], list[int]]:
    """Inclusion delays, removal delays and the ids of false landmarks.

    * inclusion: steps from the first step a vehicle is within range until a
      landmark is matched to it (0 when registered on that same step);
    * removal of a departed vehicle: see ``departure_removals``;
    * removal of a false landmark (never matched to any vehicle): steps from
      inclusion to removal.
    """
    matches = _step_matches(logs, scene, truth, match_radius)
    inclusion = []
    for v in scene.vehicles:
        visible = [i for i, log in enumerate(logs)
                   if v.present(log.k) and math.dist(v.center, truth[i][:2]) <= scene.r_max]
        if not visible:
            continue
        first = visible[0]
        hit = next((i for i in range(first, len(logs)) if v.id in matches[i].values()), None)
        if hit is not None:
            inclusion.append(logs[hit].k - logs[first].k)

    removal = [d for d in departure_removals(logs, scene, truth, match_radius, matches).values() if d is not None]
    born_at, gone_at = _lifetimes(logs)
    ever_matched = set().union(*matches) if matches else set()
    false_ids = [lid for lid in born_at if lid not in ever_matched]
    # merged-away duplicates are not removals by the M/N logic
    pruned = {lid for log in logs for lid in log.removed}
    removal.extend(gone_at[lid] - born_at[lid] for lid in false_ids if lid in pruned)
    return inclusion, removal, false_ids


def evaluate_run(result: RunResult, scene: Scene, match_radius: float = MATCH_RADIUS) -> RunMetrics:
    pos, head = pose_errors(result.logs, result.truth)
    inclusion, removal, false_ids = delays(result.logs, scene, result.truth, match_radius)

    last = result.logs[-1]
    present = [v for v in scene.vehicles if v.present(last.k)]
    in_range = [v.id for v in _in_range(scene, last.k, result.truth[-1])]
    final = landmark_matching(last.landmark_positions, present, match_radius, in_range)
    errs = [np.linalg.norm(last.landmark_positions[ei] - np.asarray(scene.vehicle(vid).center))
            for ei, vid in final.matches]
    mae = float(np.mean(errs)) if errs else math.nan
    return RunMetrics(pos, head, mae, inclusion, removal, len(false_ids), len(final.missed))


def _one(args) -> RunMetrics:
    scene, cfg, seed, match_radius = args
    return evaluate_run(run(scene, cfg, seed), scene, match_radius)


@dataclass
class MonteCarloSummary:
    runs: list[RunMetrics]
    seeds: list[int]

    def mean(self, name: str) -> float:
        vals = [getattr(r, name) for r in self.runs]
        vals = [v for v in vals if not (isinstance(v, float) and math.isnan(v))]
        return float(np.mean(vals)) if vals else math.nan

    def max(self, name: str) -> float:
        return float(max(getattr(r, name) for r in self.runs))

    def rows(self) -> list[tuple[str, float, float | None]]:
        """Rows mirroring the published results table: (metric, mean, max or None)."""
        return [
            ("platform_position_rmse_m", self.mean("platform_position_rmse"), None),
            ("platform_heading_rmse_deg", self.mean("platform_heading_rmse"), None),
            ("landmark_mae_m", self.mean("landmark_mae"), None),
            ("landmark_inclusion_mean_delay", self.mean("inclusion_delay"), None),
            ("landmark_removal_mean_delay", self.mean("removal_delay"), None),
            ("false_landmarks", self.mean("false_landmark_count"), self.max("false_landmark_count")),
            ("missed_landmarks", self.mean("missed_landmark_count"), self.max("missed_landmark_count")),
        ]


def monte_carlo(scene: Scene, cfg: SlamConfig, runs: int, seeds: Sequence[int] | None = None,
                match_radius: float = MATCH_RADIUS, workers: int = 1) -> MonteCarloSummary:
    """Independent seeded runs; ``seeds`` defaults to ``0 .. runs-1``."""
    seeds = list(range(runs)) if seeds is None else list(seeds)[:runs]
    if len(seeds) < runs:
        raise ValueError(f"{runs} runs requested but only {len(seeds)} seeds given")
    jobs = [(scene, cfg, s, match_radius) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]
    return MonteCarloSummary(results, seeds)


METRIC_FIELDS = [f.name for f in fields(RunMetrics)]
