"""Range/bearing measurement model, innovation statistics and association distance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .state import POSE_DIM, AugmentedState, LandmarkPosition, NumericalStateError, Pose, wrap_angle

MIN_RANGE = 1e-9
MAX_CONDITION = 1e12
LOG_2PI_SQ = 2.0 * np.log(2.0 * np.pi)


class DegenerateGeometryError(ValueError):
    """Landmark coincides with the platform, so bearing is undefined."""


@dataclass(frozen=True)
class RadarDetection:
    r: float
    phi: float
    amplitude: float = 1.0
    R: np.ndarray | None = field(default=None, compare=False, repr=False)

    def z(self) -> np.ndarray:
        return np.array([self.r, self.phi])


def measure(pose: Pose, landmark: LandmarkPosition) -> tuple[float, float]:
    dx = landmark[0] - pose[0]
    dy = landmark[1] - pose[1]
    r = float(np.hypot(dx, dy))
    if r <= MIN_RANGE:
        raise DegenerateGeometryError(f"landmark at range {r:.3e} from platform")
    return r, wrap_angle(np.arctan2(dy, dx) - pose[2])


def _local_jacobian(pose: Pose, landmark: LandmarkPosition) -> np.ndarray:
    """(2, 5) Jacobian w.r.t. [x, y, theta, px, py]."""
    dx = landmark[0] - pose[0]
    dy = landmark[1] - pose[1]
    q = dx * dx + dy * dy
    r = np.sqrt(q)
    if r <= MIN_RANGE:
        raise DegenerateGeometryError(f"landmark at range {r:.3e} from platform")
    return np.array([[-dx / r, -dy / r, 0.0, dx / r, dy / r],
                     [dy / q, -dx / q, -1.0, -dy / q, dx / q]])


def _slots(landmark_index: int) -> np.ndarray:
    j = POSE_DIM + 2 * landmark_index
    return np.array([0, 1, 2, j, j + 1])


def jacobian_h(state: AugmentedState, landmark_index: int) -> np.ndarray:
    H = np.zeros((2, state.dim))
    H[:, _slots(landmark_index)] = _local_jacobian(state.pose, state.landmark(landmark_index))
    return H


def condition_number(S: np.ndarray) -> float:
    """2-norm condition number of a symmetric 2x2 matrix (inf if singular or indefinite)."""
    a, b, d = S[0, 0], S[0, 1], S[1, 1]
    mid = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    lo, hi = mid - rad, mid + rad
    if not (math.isfinite(hi) and lo > 0.0):
        return math.inf
    return hi / lo


def _check_condition(S: np.ndarray) -> None:
    if condition_number(S) > MAX_CONDITION:
        raise NumericalStateError("innovation covariance is not invertible")


def _inv2(S: np.ndarray) -> np.ndarray:
    det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    return np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]]) / det


def innovation_stats(state: AugmentedState, landmark_index: int, R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Innovation covariance ``S`` (2, 2) and gain ``W`` (3+2N, 2).

    Only the five non-zero Jacobian columns are used to form ``P H^T``.
    """
    idx = _slots(landmark_index)
    Hl = _local_jacobian(state.pose, state.landmark(landmark_index))
    PHt = state.cov[:, idx] @ Hl.T
    S = Hl @ PHt[idx] + R
    S = 0.5 * (S + S.T)
    _check_condition(S)
    return S, PHt @ _inv2(S)


def innovation(z: RadarDetection | np.ndarray, state: AugmentedState, landmark_index: int) -> np.ndarray:
    z = z.z() if isinstance(z, RadarDetection) else np.asarray(z, dtype=float)
    r, phi = measure(state.pose, state.landmark(landmark_index))
    return np.array([z[0] - r, wrap_angle(z[1] - phi)])


def gaussian_nll(e: np.ndarray, S: np.ndarray) -> np.ndarray | float:
    """Negative log of the bivariate normal density of ``e`` (shape (2,) or (n, 2))."""
    e = np.asarray(e, dtype=float)
    det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    maha = np.einsum("...i,ij,...j->...", e, _inv2(S), e)
    return 0.5 * maha + 0.5 * (LOG_2PI_SQ + np.log(det))


def log_likelihood_distance(z: RadarDetection, state: AugmentedState, landmark_index: int,
                            R: np.ndarray | None = None) -> float:
    R = z.R if R is None else R
    S, _ = innovation_stats(state, landmark_index, np.asarray(R, dtype=float))
    return float(gaussian_nll(innovation(z, state, landmark_index), S))


def gate_distances(z: np.ndarray, state: AugmentedState, landmark_index: int, R: np.ndarray) -> np.ndarray:
    """Association distances of several detections ``z`` (n, 2) to one landmark.

    A singular innovation covariance (e.g. a noise-free map rigidly tied to the
    pose) is treated as a degenerate Gaussian: any nonzero innovation has zero
    likelihood, so the distance is infinite.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    pose = state.pose
    lm = state.landmark(landmark_index)
    idx = _slots(landmark_index)
    Hl = _local_jacobian(pose, lm)
    S = Hl @ state.cov[np.ix_(idx, idx)] @ Hl.T + R
    S = 0.5 * (S + S.T)
    r, phi = measure(pose, lm)
    e = np.column_stack([z[:, 0] - r, wrap_angle(z[:, 1] - phi)])
    try:
        _check_condition(S)
    except NumericalStateError:
        return np.full(len(z), np.inf)
    return np.atleast_1d(gaussian_nll(e, S))
