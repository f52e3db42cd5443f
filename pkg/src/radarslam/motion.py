"""Platform kinematics and the EKF prediction step.

The platform follows a unicycle model integrated at the midpoint heading::

    x' = x + v dt cos(theta + dt psi / 2)
    y' = y + v dt sin(theta + dt psi / 2)
    theta' = theta + psi dt

Landmarks are static, so prediction only moves the pose and inflates the
covariance through the pose rows/columns.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .state import (POSE_DIM, PSD_TOL, AugmentedState, NumericalStateError, Pose,
                    min_eigenvalue, symmetrize, wrap_angle)


class ControlInput(NamedTuple):
    v: float
    psi: float


class OdometryReading(NamedTuple):
    v_bar: float
    psi_bar: float
    U: np.ndarray

    @property
    def control(self) -> ControlInput:
        return ControlInput(self.v_bar, self.psi_bar)


def propagate_pose(pose: Pose, u: ControlInput, dt: float) -> Pose:
    heading = pose[2] + 0.5 * dt * u[1]
    return Pose(pose[0] + u[0] * dt * np.cos(heading),
                pose[1] + u[0] * dt * np.sin(heading),
                wrap_angle(pose[2] + u[1] * dt))


def _midpoint_terms(theta: float, u: ControlInput, dt: float) -> tuple[float, float]:
    heading = theta + 0.5 * dt * u[1]
    return np.sin(heading), np.cos(heading)


def pose_jacobians(pose: Pose, u: ControlInput, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """(3, 3) and (3, 2) Jacobians of the pose transition w.r.t. pose and control."""
    A, B = _midpoint_terms(pose[2], u, dt)
    v = u[0]
    Fx = np.array([[1.0, 0.0, -dt * v * A],
                   [0.0, 1.0, dt * v * B],
                   [0.0, 0.0, 1.0]])
    Fu = np.array([[dt * B, -0.5 * dt * dt * v * A],
                   [dt * A, 0.5 * dt * dt * v * B],
                   [0.0, dt]])
    return Fx, Fu


def jacobian_f_x(state: AugmentedState, u: ControlInput, dt: float) -> np.ndarray:
    """Full (3+2N, 3+2N) state Jacobian: pose block on top-left, identity elsewhere."""
    J = np.eye(state.dim)
    J[:POSE_DIM, :POSE_DIM] = pose_jacobians(state.pose, u, dt)[0]
    return J


def jacobian_f_u(state: AugmentedState, u: ControlInput, dt: float) -> np.ndarray:
    """Full (3+2N, 2) control Jacobian; landmark rows are zero."""
    J = np.zeros((state.dim, 2))
    J[:POSE_DIM] = pose_jacobians(state.pose, u, dt)[1]
    return J


def predict(state: AugmentedState, odo: OdometryReading, Q: np.ndarray, dt: float) -> AugmentedState:
    """EKF prediction with odometry ``odo`` and (3, 3) pose process noise ``Q``.

    Only the pose rows and columns of the covariance change, so the update is
    done blockwise instead of forming the full Jacobian products.
    """
    if min_eigenvalue(state.cov) < -PSD_TOL:
        raise NumericalStateError("prior covariance is not PSD")
    u = odo.control
    Fx, Fu = pose_jacobians(state.pose, u, dt)

    mean = state.mean.copy()
    mean[:POSE_DIM] = propagate_pose(state.pose, u, dt)

    P = state.cov
    cov = P.copy()
    cross = Fx @ P[:POSE_DIM, POSE_DIM:]
    cov[:POSE_DIM, :POSE_DIM] = (Fx @ P[:POSE_DIM, :POSE_DIM] @ Fx.T
                                 + Fu @ np.asarray(odo.U, dtype=float) @ Fu.T
                                 + np.asarray(Q, dtype=float))
    cov[:POSE_DIM, POSE_DIM:] = cross
    cov[POSE_DIM:, :POSE_DIM] = cross.T
    return AugmentedState(mean, symmetrize(cov))
