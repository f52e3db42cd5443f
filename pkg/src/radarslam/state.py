"""Joint pose/landmark state and the structural edits performed on it.

The mean vector is laid out as ``[x, y, theta, p1x, p1y, ..., pNx, pNy]`` and the
covariance has side length ``3 + 2N``. Landmarks keep insertion order; removing
landmarks compacts the remaining ones downward.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

POSE_DIM = 3
PSD_TOL = 1e-9


class StructuralError(ValueError):
    """Raised when a state edit would break the dimension bookkeeping."""


class NumericalStateError(ArithmeticError):
    """Raised when a covariance or innovation matrix is numerically unusable."""


def wrap_angle(a):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    if isinstance(a, float) and -math.pi < a <= math.pi:
        return a
    w = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)
    if np.ndim(w) == 0:
        return float(w)
    return w


class Pose(NamedTuple):
    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "Pose":
        return cls(float(a[0]), float(a[1]), wrap_angle(a[2]))


class LandmarkPosition(NamedTuple):
    px: float
    py: float


@dataclass
class AugmentedState:
    """Mean and covariance of the platform pose plus registered landmarks.

    Operations in this package treat instances as values: every edit returns a
    new state and leaves the input untouched.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        n = self.mean.shape[0]
        if n < POSE_DIM or (n - POSE_DIM) % 2:
            raise StructuralError(f"mean length {n} is not 3 + 2N")
        if self.cov.shape != (n, n):
            raise StructuralError(f"covariance shape {self.cov.shape} does not match mean length {n}")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def n_landmarks(self) -> int:
        return (self.mean.shape[0] - POSE_DIM) // 2

    @property
    def pose(self) -> Pose:
        return Pose(float(self.mean[0]), float(self.mean[1]), float(self.mean[2]))

    @property
    def landmark_array(self) -> np.ndarray:
        """Landmark positions as an (N, 2) array view."""
        return self.mean[POSE_DIM:].reshape(-1, 2)

    @property
    def landmarks(self) -> list[LandmarkPosition]:
        return [LandmarkPosition(float(p[0]), float(p[1])) for p in self.landmark_array]

    def landmark(self, i: int) -> LandmarkPosition:
        j = POSE_DIM + 2 * i
        return LandmarkPosition(float(self.mean[j]), float(self.mean[j + 1]))

    def landmark_cov(self, i: int) -> np.ndarray:
        j = POSE_DIM + 2 * i
        return self.cov[j:j + 2, j:j + 2]

    def copy(self) -> "AugmentedState":
        return AugmentedState(self.mean.copy(), self.cov.copy())

    def check(self, tol: float = PSD_TOL) -> None:
        """Raise if the covariance is asymmetric or has a negative eigenvalue below ``-tol``."""
        if not np.all(np.isfinite(self.mean)) or not np.all(np.isfinite(self.cov)):
            raise NumericalStateError("non-finite entries in state")
        if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > tol:
            raise NumericalStateError("covariance is not symmetric")
        min_eig = min_eigenvalue(self.cov)
        if min_eig < -tol:
            raise NumericalStateError(f"covariance not PSD (min eigenvalue {min_eig:.3e})")


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def min_eigenvalue(P: np.ndarray) -> float:
    if P.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(symmetrize(P))[0])


def initial_state(pose: Pose | Sequence[float], pose_var: float = 1e-6) -> AugmentedState:
    """State with a (nearly) known pose and no landmarks."""
    mean = np.array([pose[0], pose[1], wrap_angle(pose[2])], dtype=float)
    return AugmentedState(mean, pose_var * np.eye(POSE_DIM))


def append_landmark(state: AugmentedState, position: LandmarkPosition | Sequence[float],
                    cross_cov: np.ndarray, landmark_cov: np.ndarray) -> AugmentedState:
    """Concatenate a landmark at the end of the state.

    ``cross_cov`` is the (2, 3+2N) covariance between the new landmark and the
    existing state, ``landmark_cov`` its own (2, 2) block.
    """
    n = state.dim
    cross_cov = np.asarray(cross_cov, dtype=float)
    landmark_cov = np.asarray(landmark_cov, dtype=float)
    if cross_cov.shape != (2, n):
        raise StructuralError(f"cross covariance must be (2, {n}), got {cross_cov.shape}")
    if landmark_cov.shape != (2, 2):
        raise StructuralError(f"landmark covariance must be (2, 2), got {landmark_cov.shape}")
    position = np.asarray(position, dtype=float)
    if position.shape != (2,) or not np.all(np.isfinite(position)):
        raise StructuralError("landmark position must be two finite values")

    mean = np.concatenate([state.mean, position])
    cov = np.empty((n + 2, n + 2))
    cov[:n, :n] = state.cov
    cov[n:, :n] = cross_cov
    cov[:n, n:] = cross_cov.T
    cov[n:, n:] = symmetrize(landmark_cov)
    return AugmentedState(mean, cov)


def landmark_slots(indices: Iterable[int]) -> list[int]:
    """State-vector slots occupied by the given landmark indices."""
    out = []
    for i in indices:
        out.extend((POSE_DIM + 2 * i, POSE_DIM + 2 * i + 1))
    return out


def remove_landmarks(state: AugmentedState, indices: Iterable[int]) -> AugmentedState:
    indices = list(indices)
    if not indices:
        return state.copy()
    if len(set(indices)) != len(indices):
        raise StructuralError(f"duplicate landmark indices {indices}")
    for i in indices:
        if not 0 <= i < state.n_landmarks:
            raise StructuralError(f"landmark index {i} out of range for {state.n_landmarks} landmarks")
    keep = np.setdiff1d(np.arange(state.dim), landmark_slots(indices))
    return AugmentedState(state.mean[keep], state.cov[np.ix_(keep, keep)])


@dataclass
class LandmarkRecord:
    """M/N bookkeeping for one registered landmark.

    Records are kept in a list aligned with the landmark order of the state, so
    a record's position in that list is its landmark index.
    """

    id: int
    birth_step: int
    window: int
    hit_window: deque = field(default=None)
    in_range_window: deque = field(default=None)

    def __post_init__(self) -> None:
        if self.hit_window is None:
            self.hit_window = deque(maxlen=self.window)
        if self.in_range_window is None:
            self.in_range_window = deque(maxlen=self.window)

    def push(self, hit: bool, in_range: bool) -> None:
        self.hit_window.append(bool(hit))
        self.in_range_window.append(bool(in_range))

    def copy(self) -> "LandmarkRecord":
        return LandmarkRecord(self.id, self.birth_step, self.window,
                              deque(self.hit_window, maxlen=self.window),
                              deque(self.in_range_window, maxlen=self.window))
