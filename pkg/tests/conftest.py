import numpy as np
import pytest

from radarslam.state import AugmentedState

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def random_state(rng: np.random.Generator, n_landmarks: int, spread: float = 15.0,
                 min_range: float = 1.0) -> AugmentedState:
    """Random pose, landmarks at least ``min_range`` from the platform and a random SPD covariance."""
    pose = np.array([rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-np.pi, np.pi)])
    marks = []
    while len(marks) < n_landmarks:
        p = pose[:2] + rng.uniform(-spread, spread, 2)
        if np.linalg.norm(p - pose[:2]) >= min_range:
            marks.append(p)
    mean = np.concatenate([pose, np.ravel(marks)])
    n = mean.size
    A = rng.normal(size=(n, n)) * 0.1
    cov = A @ A.T + 1e-3 * np.eye(n)
    return AugmentedState(mean, cov)


def numeric_jacobian(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(f(x))
    J = np.zeros((f0.size, x.size))
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = h
        J[:, j] = (np.atleast_1d(f(x + dx)) - np.atleast_1d(f(x - dx))) / (2 * h)
    return J


def rel_close(A: np.ndarray, B: np.ndarray, tol: float = 1e-5) -> bool:
    """Max entry difference relative to the largest entry of either matrix (scale floored at 1)."""
    scale = max(np.max(np.abs(A)), np.max(np.abs(B)), 1.0)
    return float(np.max(np.abs(A - B))) <= tol * scale


@pytest.fixture
def acceptance(request):
    """Record a one-line acceptance verdict printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(criterion: int, ok: bool, detail: str) -> None:
        lines.append((criterion, f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
