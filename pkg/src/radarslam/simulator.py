"""Synthetic car-park world: parked vehicles as rectangles, clutter, odometry noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measurement import RadarDetection
from .motion import ControlInput, OdometryReading, propagate_pose
from .state import Pose, wrap_angle

CLUTTER = "clutter"
NEVER = math.inf


def as_matrix(a) -> tuple[tuple[float, ...], ...]:
    """Hashable tuple-of-tuples copy of a 2-D array."""
    return tuple(tuple(float(x) for x in row) for row in np.atleast_2d(np.asarray(a, dtype=float)))


@dataclass(frozen=True)
class VehicleTruth:
    id: str
    center: tuple[float, float]
    length: float = 4.5
    width: float = 1.8
    orientation: float = 0.0
    birth: int = 0
    departure: float = NEVER

    def __post_init__(self) -> None:
        if self.length <= 0 or self.width <= 0:
            raise ValueError(f"vehicle {self.id}: length and width must be positive")
        if not self.birth < self.departure:
            raise ValueError(f"vehicle {self.id}: birth must precede departure")

    def present(self, k: int) -> bool:
        return self.birth <= k < self.departure

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        d = np.atleast_2d(pts) - np.asarray(self.center)
        return np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])

    def to_global(self, local: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        return np.column_stack([self.center[0] + c * local[:, 0] - s * local[:, 1],
                                self.center[1] + s * local[:, 0] + c * local[:, 1]])

    def distance(self, pts: np.ndarray) -> np.ndarray:
        """Point-to-rectangle distance, zero inside."""
        loc = self.to_local(pts)
        ex = np.maximum(np.abs(loc[:, 0]) - 0.5 * self.length, 0.0)
        ey = np.maximum(np.abs(loc[:, 1]) - 0.5 * self.width, 0.0)
        return np.hypot(ex, ey)

    def contains(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return self.distance(pts) <= tol

    def corners(self) -> np.ndarray:
        hl, hw = 0.5 * self.length, 0.5 * self.width
        return self.to_global(np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]]))

    def visible_fraction(self, sensor_xy) -> float:
        """Length of the sides facing the sensor over ``length + width``."""
        sx, sy = self.to_local(np.asarray(sensor_xy, dtype=float))[0]
        seen = 0.0
        if abs(sy) > 0.5 * self.width:
            seen += self.length
        if abs(sx) > 0.5 * self.length:
            seen += self.width
        return seen / (self.length + self.width)


@dataclass(frozen=True)
class TrajectorySegment:
    steps: int
    v: float
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class ClutterBurst:
    """``count`` extra false detections uniform over a disc, on each step of ``[step, step + duration)``."""

    step: int
    center: tuple[float, float]
    count: int = 8
    radius: float = 1.0
    duration: int = 1


@dataclass(frozen=True)
class Scene:
    vehicles: tuple[VehicleTruth, ...]
    trajectory: tuple[TrajectorySegment, ...]
    steps: int | None = None
    dt: float = 0.16
    r_max: float = 20.0
    initial_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    clutter_rate: float = 2.0
    detections_per_vehicle: float = 8.0
    clutter_bursts: tuple[ClutterBurst, ...] = ()
    R: tuple = field(default_factory=lambda: as_matrix(np.diag([0.5 ** 2, np.deg2rad(1.0) ** 2])))
    U: tuple = field(default_factory=lambda: as_matrix(np.diag([0.02 ** 2, np.deg2rad(0.008) ** 2])))

    def __post_init__(self) -> None:
        object.__setattr__(self, "R", as_matrix(self.R))
        object.__setattr__(self, "U", as_matrix(self.U))
        total = sum(s.steps for s in self.trajectory)
        if self.steps is None:
            object.__setattr__(self, "steps", total)
        if self.steps < 1:
            raise ValueError("scene needs at least one step")
        if total < self.steps:
            raise ValueError(f"trajectory covers {total} steps but the scene has {self.steps}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def controls(self) -> list[ControlInput]:
        out = []
        for seg in self.trajectory:
            out.extend([ControlInput(seg.v, seg.yaw_rate)] * seg.steps)
        return out[:self.steps]

    def true_poses(self) -> list[Pose]:
        """True pose after each of the ``steps`` motion steps."""
        pose = Pose(*self.initial_pose)
        out = []
        for u in self.controls():
            pose = step_truth(pose, u, self.dt)
            out.append(pose)
        return out

    @property
    def R_array(self) -> np.ndarray:
        return np.array(self.R)

    @property
    def U_array(self) -> np.ndarray:
        return np.array(self.U)

    def vehicle(self, vid: str) -> VehicleTruth:
        for v in self.vehicles:
            if v.id == vid:
                return v
        raise KeyError(vid)


@dataclass
class FrameTruth:
    k: int
    pose: Pose
    detections: list[RadarDetection]
    origins: list[str]


def step_truth(pose: Pose, true_u: ControlInput, dt: float) -> Pose:
    return propagate_pose(pose, true_u, dt)


def _noise_factor(C: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def generate_odometry(true_u: ControlInput, U: np.ndarray, rng: np.random.Generator) -> OdometryReading:
    U = np.asarray(U, dtype=float)
    eta = _noise_factor(U) @ rng.standard_normal(2)
    return OdometryReading(true_u[0] + eta[0], true_u[1] + eta[1], U)


def _truncated_poisson(lam: float, rng: np.random.Generator) -> int:
    if lam <= 0:
        return 1
    while True:
        n = int(rng.poisson(lam))
        if n >= 1:
            return n


def generate_frame(scene: Scene, k: int, true_pose: Pose, rng: np.random.Generator) -> FrameTruth:
    """Radar detections at step ``k`` from the true pose ``true_pose``."""
    pos = np.array(true_pose[:2])
    R = scene.R_array
    L = _noise_factor(R)
    dets: list[RadarDetection] = []
    origins: list[str] = []

    def emit(points: np.ndarray, origin: str, noisy: bool) -> None:
        d = points - pos
        r = np.hypot(d[:, 0], d[:, 1])
        phi = np.arctan2(d[:, 1], d[:, 0]) - true_pose[2]
        if noisy:
            noise = rng.standard_normal((len(points), 2)) @ L.T
            r = r + noise[:, 0]
            phi = phi + noise[:, 1]
        amp = rng.uniform(0.0, 1.0, len(points))
        phi = wrap_angle(phi)
        for ri, pi, ai in zip(np.atleast_1d(r), np.atleast_1d(phi), amp):
            if 0.0 < ri <= scene.r_max:
                dets.append(RadarDetection(float(ri), float(pi), float(ai), R))
                origins.append(origin)

    for v in scene.vehicles:
        if not v.present(k) or math.dist(v.center, pos) > scene.r_max:
            continue
        lam = scene.detections_per_vehicle * v.visible_fraction(pos)
        n = _truncated_poisson(lam, rng)
        local = np.column_stack([rng.uniform(-0.5 * v.length, 0.5 * v.length, n),
                                 rng.uniform(-0.5 * v.width, 0.5 * v.width, n)])
        emit(v.to_global(local), v.id, True)

    n_clutter = int(rng.poisson(scene.clutter_rate)) if scene.clutter_rate > 0 else 0
    if n_clutter:
        rad = scene.r_max * np.sqrt(rng.uniform(0.0, 1.0, n_clutter))
        ang = rng.uniform(-np.pi, np.pi, n_clutter)
        emit(pos + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]), CLUTTER, False)

    for b in scene.clutter_bursts:
        if b.step <= k < b.step + b.duration:
            rad = b.radius * np.sqrt(rng.uniform(0.0, 1.0, b.count))
            ang = rng.uniform(-np.pi, np.pi, b.count)
            emit(np.asarray(b.center) + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]),
                 CLUTTER, False)

    return FrameTruth(k, true_pose, dets, origins)
