"""One recursion of EKF-SLAM with landmark management, and full simulated runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import landmarks as lm
from .landmarks import CandidateTrack, ManagerConfig
from .measurement import RadarDetection
from .motion import OdometryReading, predict
from .simulator import FrameTruth, Scene, generate_frame, generate_odometry, step_truth
from .state import AugmentedState, LandmarkRecord, NumericalStateError, Pose, initial_state, remove_landmarks

# ids are 100 * birth_step + order within the step
IDS_PER_STEP = 100


@dataclass(frozen=True)
class SlamConfig:
    manager: ManagerConfig = field(default_factory=ManagerConfig)
    R: tuple = ((0.5 ** 2, 0.0), (0.0, np.deg2rad(1.0) ** 2))
    Q: tuple = ((1.5e-3, 0.0, 0.0), (0.0, 1.5e-3, 0.0), (0.0, 0.0, 5e-5))
    dt: float = 0.16

    @property
    def R_array(self) -> np.ndarray:
        return np.array(self.R, dtype=float)

    @property
    def Q_array(self) -> np.ndarray:
        return np.array(self.Q, dtype=float)


@dataclass
class StepLog:
    k: int
    prior_pose: Pose
    posterior_pose: Pose
    landmark_ids: list[int]
    landmark_positions: np.ndarray
    included: list[tuple[int, str]] = field(default_factory=list)
    removed: list[int] = field(default_factory=list)
    merged: list[tuple[int, int]] = field(default_factory=list)
    n_detections: int = 0
    n_sifted: int = 0
    n_remaining: int = 0
    n_clusters: int = 0
    n_noise: int = 0
    n_associated: int = 0
    update_traces: list[tuple[float, float]] = field(default_factory=list, repr=False)
    true_pose: Pose | None = None


class StepError(RuntimeError):
    def __init__(self, k: int, cause: Exception):
        super().__init__(f"step {k}: {cause}")
        self.k = k
        self.cause = cause


def step(k: int, state: AugmentedState, records: list[LandmarkRecord], tracks: list[CandidateTrack],
         detections: list[RadarDetection], odo: OdometryReading,
         cfg: SlamConfig) -> tuple[AugmentedState, list[LandmarkRecord], list[CandidateTrack], StepLog]:
    """predict -> sift -> associate/update -> removal -> cluster -> confirm/include -> merge."""
    mcfg = cfg.manager
    R = cfg.R_array
    records = [r.copy() for r in records]

    state = predict(state, odo, cfg.Q_array, cfg.dt)
    prior = state.pose

    z = lm.detections_to_array(detections)
    near = lm.sift_mask(z, state, mcfg.gamma_s)
    upd = lm.associate_and_update(state, z[near], R, mcfg)
    state = upd.state

    lm.update_windows(records, upd.hits, state, prior, mcfg)
    doomed = lm.removal_pass(records, state, mcfg, prior)
    removed_ids = [records[i].id for i in doomed]
    state = remove_landmarks(state, doomed)
    gone = set(doomed)
    records = [r for i, r in enumerate(records) if i not in gone]

    rest = [d for d, m in zip(detections, near) if not m]
    clusters, noise = lm.cluster_detections(rest, prior, mcfg)
    confirmed, tracks = lm.confirm(clusters, tracks, state, R, mcfg)
    included = []
    for j, (cluster, rule) in enumerate(confirmed):
        state = lm.include(state, cluster.center, R)
        rec = LandmarkRecord(IDS_PER_STEP * k + j, k, mcfg.m_rem)
        records.append(rec)
        included.append((rec.id, rule))

    state, records, merged = lm.merge_pass(state, records, mcfg)

    log = StepLog(k, prior, state.pose, [r.id for r in records], state.landmark_array.copy(),
                  included, removed_ids, merged, len(detections), int(near.sum()),
                  len(rest), len(clusters), len(noise), len(upd.pairs), upd.traces)
    return state, records, tracks, log


@dataclass
class RunResult:
    logs: list[StepLog]
    state: AugmentedState
    truth: list[Pose]
    frames: list[FrameTruth] | None = None


def run(scene: Scene, cfg: SlamConfig, seed: int, keep_frames: bool = False,
        callback: Callable[[int, AugmentedState, StepLog], None] | None = None) -> RunResult:
    """Simulate ``scene.steps`` frames and filter them.

    ``callback(k, state, log)`` is invoked after every step.
    """
    rng = np.random.default_rng(seed)
    pose = Pose(*scene.initial_pose)
    state = initial_state(pose)
    records: list[LandmarkRecord] = []
    tracks: list[CandidateTrack] = []
    U = scene.U_array
    logs, truth, frames = [], [], []
    for k, u in enumerate(scene.controls()):
        pose = step_truth(pose, u, scene.dt)
        odo = generate_odometry(u, U, rng)
        frame = generate_frame(scene, k, pose, rng)
        try:
            state, records, tracks, log = step(k, state, records, tracks, frame.detections, odo, cfg)
        except (NumericalStateError, np.linalg.LinAlgError) as exc:
            raise StepError(k, exc) from exc
        log.true_pose = pose
        logs.append(log)
        truth.append(pose)
        if keep_frames:
            frames.append(frame)
        if callback is not None:
            callback(k, state, log)
    return RunResult(logs, state, truth, frames if keep_frames else None)
