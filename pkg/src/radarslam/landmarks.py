"""Rule-based landmark management.

Per frame the manager

1. sifts detections into those near a registered landmark (``Z_s``) and the rest (``Z_r``),
2. associates ``Z_s`` to landmarks by log-likelihood distance and applies sequential EKF updates,
3. removes landmarks that stay in range but stop producing detections (M/N logic),
4. clusters ``Z_r`` with DBSCAN and confirms clusters as new landmarks
   (Rule 1: large cluster; Rule 2: M/N over candidate tracks),
5. appends confirmed landmarks to the state, and
6. merges landmarks that ended up closer than ``gamma_m``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .measurement import RadarDetection, gate_distances, innovation, innovation_stats
from .state import (POSE_DIM, AugmentedState, LandmarkRecord, Pose, append_landmark,
                    remove_landmarks, symmetrize, wrap_angle)

RULE_SIZE = "rule1"
RULE_TRACK = "rule2"


@dataclass(frozen=True)
class ManagerConfig:
    gamma_s: float = 3.0
    gamma_c: float = 2.5
    gamma_a: float = 3.5
    gamma_m: float = 1.5
    alpha: float = 500.0
    beta: float = 20.0
    n_c1: int = 6
    n_c2: int = 2
    m_init: int = 5
    n_init: int = 3
    m_rem: int = 10
    n_rem: int = 2
    r_max: float = 20.0

    def __post_init__(self) -> None:
        for name in ("gamma_s", "gamma_c", "gamma_a", "gamma_m", "alpha", "beta", "r_max"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive number, got {value!r}")
        for name in ("n_c1", "n_c2", "m_init", "n_init", "m_rem", "n_rem"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.n_init > self.m_init:
            raise ValueError("n_init must not exceed m_init")
        if self.n_rem > self.m_rem:
            raise ValueError("n_rem must not exceed m_rem")
        if self.gamma_m >= self.gamma_s:
            raise ValueError("gamma_m must be smaller than gamma_s")


@dataclass
class Cluster:
    members: list[RadarDetection]
    center: RadarDetection
    center_global: np.ndarray

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class CandidateTrack:
    last_center_global: np.ndarray
    hit_window: deque
    last_cluster: Cluster
    misses: int = 0

    @classmethod
    def spawn(cls, cluster: Cluster, m_init: int) -> "CandidateTrack":
        return cls(cluster.center_global.copy(), deque([True], maxlen=m_init), cluster)

    def copy(self) -> "CandidateTrack":
        return CandidateTrack(self.last_center_global.copy(),
                              deque(self.hit_window, maxlen=self.hit_window.maxlen),
                              self.last_cluster, self.misses)


@dataclass
class UpdateResult:
    state: AugmentedState
    hits: np.ndarray
    pairs: list[tuple[int, int]] = field(default_factory=list)
    traces: list[tuple[float, float]] = field(default_factory=list)


def detections_to_array(detections: list[RadarDetection]) -> np.ndarray:
    """(n, 3) array of ``[r, phi, amplitude]``."""
    if not detections:
        return np.zeros((0, 3))
    return np.array([(d.r, d.phi, d.amplitude) for d in detections], dtype=float)


def to_global(pose: Pose, r: np.ndarray, phi: np.ndarray) -> np.ndarray:
    bearing = pose[2] + np.asarray(phi)
    return np.column_stack([pose[0] + r * np.cos(bearing), pose[1] + r * np.sin(bearing)])


def sift(detections: list[RadarDetection], state: AugmentedState,
         cfg: ManagerConfig) -> tuple[list[RadarDetection], list[RadarDetection]]:
    """Split detections into (near a registered landmark, everything else)."""
    mask = sift_mask(detections_to_array(detections), state, cfg.gamma_s)
    near = [d for d, m in zip(detections, mask) if m]
    rest = [d for d, m in zip(detections, mask) if not m]
    return near, rest


def sift_mask(z: np.ndarray, state: AugmentedState, gamma_s: float) -> np.ndarray:
    if len(z) == 0 or state.n_landmarks == 0:
        return np.zeros(len(z), dtype=bool)
    pts = to_global(state.pose, z[:, 0], z[:, 1])
    d = np.linalg.norm(pts[:, None, :] - state.landmark_array[None, :, :], axis=2)
    return np.any(d <= gamma_s, axis=1)


def assign_detections(D: np.ndarray, beta: float) -> np.ndarray:
    """Landmark index per detection (``-1`` if none gates).

    ``D`` is (n_landmarks, n_detections). Each detection goes to the gated
    landmark with the smallest distance; ties resolve to the lower index.
    """
    if D.size == 0:
        return np.full(D.shape[1], -1, dtype=int)
    best = np.argmin(D, axis=0)
    gated = D[best, np.arange(D.shape[1])] < beta
    return np.where(gated, best, -1)


def association_distances(state: AugmentedState, z: np.ndarray, R: np.ndarray) -> np.ndarray:
    D = np.empty((state.n_landmarks, len(z)))
    for i in range(state.n_landmarks):
        D[i] = gate_distances(z[:, :2], state, i, R)
    return D


def associate_and_update(state: AugmentedState, Z_s: list[RadarDetection] | np.ndarray,
                         R: np.ndarray, cfg: ManagerConfig) -> UpdateResult:
    """Gate ``Z_s`` against every landmark and apply the associated detections one by one.

    Association is decided once on the predicted state. Each update then
    re-linearises at the state refreshed by the previous one.
    """
    z = Z_s if isinstance(Z_s, np.ndarray) else detections_to_array(Z_s)
    n_l = state.n_landmarks
    hits = np.zeros(n_l, dtype=bool)
    if len(z) == 0 or n_l == 0:
        return UpdateResult(state.copy(), hits)

    owner = assign_detections(association_distances(state, z, R), cfg.beta)
    out = UpdateResult(state.copy(), hits)
    cur = out.state
    for i in range(n_l):
        for j in np.flatnonzero(owner == i):
            S, W = innovation_stats(cur, i, R)
            e = innovation(z[j, :2], cur, i)
            before = float(np.trace(cur.cov))
            cur.mean = cur.mean + W @ e
            cur.mean[2] = wrap_angle(cur.mean[2])
            cur.cov = symmetrize(cur.cov - W @ S @ W.T)
            out.traces.append((before, float(np.trace(cur.cov))))
            out.pairs.append((i, int(j)))
            hits[i] = True
    return out


def update_windows(records: list[LandmarkRecord], hits: np.ndarray, state: AugmentedState,
                   predicted_pose: Pose, cfg: ManagerConfig) -> None:
    """Push this frame's hit and in-range flags into every record."""
    if not records:
        return
    dist = np.linalg.norm(state.landmark_array - np.array(predicted_pose[:2]), axis=1)
    for rec, hit, d in zip(records, hits, dist):
        rec.push(hit, d <= cfg.r_max)


def should_remove(rec: LandmarkRecord, cfg: ManagerConfig) -> bool:
    if len(rec.hit_window) < cfg.m_rem:
        return False
    return all(rec.in_range_window) and sum(rec.hit_window) < cfg.n_rem


def removal_pass(records: list[LandmarkRecord], state: AugmentedState, cfg: ManagerConfig,
                 predicted_pose: Pose | None = None) -> list[int]:
    """Indices of landmarks whose full, in-range window has fewer than ``n_rem`` hits.

    The windows must already hold the current frame (see ``update_windows``).
    """
    if len(records) != state.n_landmarks:
        raise ValueError("records are not aligned with the state landmarks")
    return [i for i, rec in enumerate(records) if should_remove(rec, cfg)]


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Cluster labels (``-1`` for noise) for an (n, 2) point array.

    Points are visited in index order; a border point reachable from several
    clusters joins the first one that reaches it. A point's neighbourhood
    includes itself.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    labels = np.full(n, -1, dtype=int)
    if n == 0:
        return labels
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2)
    neighbours = d2 <= eps * eps
    core = neighbours.sum(axis=1) >= min_pts
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        visited[i] = True
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in np.flatnonzero(neighbours[p]):
                if labels[q] == -1:
                    labels[q] = cluster
                if core[q] and not visited[q]:
                    visited[q] = True
                    queue.append(q)
        cluster += 1
    return labels


def cluster_detections(Z_r: list[RadarDetection], pose: Pose,
                       cfg: ManagerConfig) -> tuple[list[Cluster], list[RadarDetection]]:
    """DBSCAN over detections projected to the global frame with ``pose``.

    Returns the clusters (centre = strongest member) and the noise detections.
    """
    z = detections_to_array(Z_r)
    pts = to_global(pose, z[:, 0], z[:, 1]) if len(z) else np.zeros((0, 2))
    labels = dbscan(pts, cfg.gamma_c, cfg.n_c2)
    clusters = []
    for c in range(labels.max(initial=-1) + 1):
        idx = np.flatnonzero(labels == c)
        best = idx[np.argmax(z[idx, 2])]
        clusters.append(Cluster([Z_r[i] for i in idx], Z_r[best], pts[best].copy()))
    noise = [Z_r[i] for i in np.flatnonzero(labels == -1)]
    return clusters, noise


def eligible(cluster: Cluster, state: AugmentedState, R: np.ndarray, cfg: ManagerConfig) -> bool:
    """True if the cluster centre is farther than ``alpha`` from every landmark."""
    if state.n_landmarks == 0:
        return True
    z = np.array([[cluster.center.r, cluster.center.phi]])
    return min(float(gate_distances(z, state, i, R)[0]) for i in range(state.n_landmarks)) > cfg.alpha


def _match_tracks(clusters: list[Cluster], tracks: list[CandidateTrack], gamma_a: float) -> dict[int, int]:
    """Greedy nearest-first one-to-one cluster -> track matching within ``gamma_a``."""
    pairs = []
    for ci, c in enumerate(clusters):
        for ti, t in enumerate(tracks):
            d = float(np.linalg.norm(c.center_global - t.last_center_global))
            if d < gamma_a:
                pairs.append((d, ci, ti))
    pairs.sort()
    matched: dict[int, int] = {}
    used = set()
    for _, ci, ti in pairs:
        if ci in matched or ti in used:
            continue
        matched[ci] = ti
        used.add(ti)
    return matched


def confirm(clusters: list[Cluster], tracks: list[CandidateTrack], state: AugmentedState,
            R: np.ndarray, cfg: ManagerConfig) -> tuple[list[tuple[Cluster, str]], list[CandidateTrack]]:
    """Apply Rule 1 / Rule 2 to this frame's clusters.

    Returns ``(confirmed, tracks')`` where ``confirmed`` holds ``(cluster, rule)``
    pairs in cluster order. Input tracks are not modified.
    """
    tracks = [t.copy() for t in tracks]
    candidates = [c for c in clusters if eligible(c, state, R, cfg)]
    matched = _match_tracks(candidates, tracks, cfg.gamma_a)

    confirmed: list[tuple[Cluster, str]] = []
    spawned: list[CandidateTrack] = []
    dropped: set[int] = set()
    touched: set[int] = set()
    for ci, c in enumerate(candidates):
        ti = matched.get(ci)
        if len(c) >= cfg.n_c1:
            confirmed.append((c, RULE_SIZE))
            if ti is not None:
                dropped.add(ti)
            continue
        if ti is None:
            track = CandidateTrack.spawn(c, cfg.m_init)
            if sum(track.hit_window) >= cfg.n_init:
                confirmed.append((c, RULE_TRACK))
            else:
                spawned.append(track)
            continue
        track = tracks[ti]
        touched.add(ti)
        track.hit_window.append(True)
        track.misses = 0
        track.last_center_global = c.center_global.copy()
        track.last_cluster = c
        if sum(track.hit_window) >= cfg.n_init:
            confirmed.append((c, RULE_TRACK))
            dropped.add(ti)

    kept = []
    for ti, track in enumerate(tracks):
        if ti in dropped:
            continue
        if ti not in touched:
            track.hit_window.append(False)
            track.misses += 1
            if track.misses >= cfg.m_init:
                continue
        kept.append(track)
    return confirmed, kept + spawned


def inclusion_jacobians(state: AugmentedState, center: RadarDetection) -> tuple[np.ndarray, np.ndarray]:
    """Dense Jacobians of the augmentation map w.r.t. the state and the (r, phi) centre."""
    n = state.dim
    theta = state.mean[2]
    s, c = np.sin(theta + center.phi), np.cos(theta + center.phi)
    r = center.r
    J1 = np.zeros((n + 2, n))
    J1[:n, :n] = np.eye(n)
    J1[n:, :POSE_DIM] = [[1.0, 0.0, -r * s], [0.0, 1.0, r * c]]
    J2 = np.zeros((n + 2, 2))
    J2[n:] = [[c, -r * s], [s, r * c]]
    return J1, J2


def augment(state: AugmentedState, z: np.ndarray) -> np.ndarray:
    """Augmented mean ``[x; px; py]`` for a polar centre ``z = (r, phi)``."""
    x, y, theta = state.mean[:POSE_DIM]
    return np.concatenate([state.mean, [x + z[0] * np.cos(theta + z[1]), y + z[0] * np.sin(theta + z[1])]])


def include(state: AugmentedState, center: RadarDetection, R: np.ndarray) -> AugmentedState:
    """Register a confirmed cluster centre as a new landmark.

    Equivalent to ``J1 P J1^T + J2 R J2^T`` but only the new rows are computed,
    since ``J1`` is the identity on the existing state.
    """
    theta = state.mean[2]
    s, c = np.sin(theta + center.phi), np.cos(theta + center.phi)
    r = center.r
    Gp = np.array([[1.0, 0.0, -r * s], [0.0, 1.0, r * c]])
    Gz = np.array([[c, -r * s], [s, r * c]])
    position = state.mean[:2] + r * np.array([c, s])
    cross = Gp @ state.cov[:POSE_DIM]
    own = Gp @ state.cov[:POSE_DIM, :POSE_DIM] @ Gp.T + Gz @ np.asarray(R, dtype=float) @ Gz.T
    return append_landmark(state, position, cross, own)


def merge_pass(state: AugmentedState, records: list[LandmarkRecord],
               cfg: ManagerConfig) -> tuple[AugmentedState, list[LandmarkRecord], list[tuple[int, int]]]:
    """Merge landmarks closer than ``gamma_m``, nearest pair first.

    Of each pair the landmark with the larger own-covariance trace is removed
    (on a tie the lower index survives). Returns the new state, the surviving
    records and ``(kept_id, removed_id)`` pairs.
    """
    records = list(records)
    merged: list[tuple[int, int]] = []
    while state.n_landmarks > 1:
        pts = state.landmark_array
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        iu, ju = np.triu_indices(len(pts), k=1)
        close = d[iu, ju] < cfg.gamma_m
        if not np.any(close):
            break
        order = np.lexsort((ju[close], iu[close], d[iu, ju][close]))
        i, j = int(iu[close][order[0]]), int(ju[close][order[0]])
        ti = np.trace(state.landmark_cov(i))
        tj = np.trace(state.landmark_cov(j))
        keep, drop = (j, i) if ti > tj else (i, j)
        merged.append((records[keep].id, records[drop].id))
        state = remove_landmarks(state, [drop])
        del records[drop]
    return state, records, merged
