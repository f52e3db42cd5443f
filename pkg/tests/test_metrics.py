import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarslam.metrics import (MonteCarloSummary, RunMetrics, delays, evaluate_run, landmark_matching, monte_carlo,
                               pose_errors)
from radarslam.scenario import bundled_scenario
from radarslam.simulator import Scene, TrajectorySegment, VehicleTruth
from radarslam.slam import StepLog, run
from radarslam.state import Pose


def _log(k, ids=(), pts=(), included=(), removed=(), pose=(0.0, 0.0, 0.0)):
    return StepLog(k, Pose(*pose), Pose(*pose), list(ids), np.array(pts, dtype=float).reshape(-1, 2),
                   list(included), list(removed))


def test_pose_errors():
    logs = [_log(0, pose=(1.0, 0.0, 0.1)), _log(1, pose=(0.0, 0.0, -0.1))]
    truth = [Pose(0, 0, 0), Pose(0, 1, 0)]
    pos, head = pose_errors(logs, truth)
    assert pos == pytest.approx(1.0)
    assert head == pytest.approx(math.degrees(0.1))


def test_pose_errors_wrap_heading():
    pos, head = pose_errors([_log(0, pose=(0, 0, math.pi - 0.01))], [Pose(0, 0, -math.pi + 0.01)])
    assert head == pytest.approx(math.degrees(0.02))


def test_landmark_matching_one_to_one():
    a = VehicleTruth("a", (0.0, 0.0))
    b = VehicleTruth("b", (10.0, 0.0))
    est = np.array([[0.5, 0.2], [1.0, 0.0], [30.0, 0.0]])
    m = landmark_matching(est, [a, b])
    # both estimates sit inside a; the one closer to its centre wins
    assert m.matches == [(0, "a")]
    assert m.false == [1, 2]
    assert m.missed == ["b"]
    assert landmark_matching(est, [a, b], in_range=["a"]).missed == []


def test_landmark_matching_radius():
    a = VehicleTruth("a", (0.0, 0.0), 4.0, 2.0)
    assert landmark_matching(np.array([[4.4, 0.0]]), [a], 2.5).matches == [(0, "a")]
    assert landmark_matching(np.array([[4.6, 0.0]]), [a], 2.5).matches == []


def _max_matching(est, vehicles, radius):
    """Size of a maximum one-to-one matching within ``radius`` (exhaustive)."""
    best = 0
    ids = list(range(len(vehicles)))
    for perm in itertools.permutations(ids + [None] * len(est), len(est)):
        pairs = [(e, v) for e, v in enumerate(perm) if v is not None]
        if all(vehicles[v].distance(est[e][None])[0] <= radius for e, v in pairs):
            best = max(best, len(pairs))
    return best


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_greedy_matching_counts_match_exhaustive_on_unambiguous_scenes(seed):
    rng = np.random.default_rng(seed)
    # vehicles 12 m apart: each estimate is within 2.5 m of at most one rectangle
    vehicles = [VehicleTruth(str(i), (12.0 * i, 0.0)) for i in range(3)]
    est = np.column_stack([rng.uniform(-5, 29, 4), rng.uniform(-4, 4, 4)])
    m = landmark_matching(est, vehicles, 2.5)
    size = _max_matching(est, vehicles, 2.5)
    assert len(m.matches) == size
    assert len(m.false) == len(est) - size
    assert len(m.missed) == len(vehicles) - size


def test_delays_on_scripted_logs():
    stay = VehicleTruth("stay", (5.0, 0.0))
    dep = VehicleTruth("dep", (-30.0, 0.0), departure=3)
    scene = Scene((stay, dep), (TrajectorySegment(8, 1.0),))
    truth = [Pose(0, 0, 0)] * 3 + [Pose(-15, 0, 0)] * 5
    logs = [
        _log(0, [1], [[-30, 0]], included=[(1, "rule1")]),
        _log(1, [1], [[-30, 0]]),
        _log(2, [1, 200], [[-30, 0], [5, 0]], included=[(200, "rule2")]),
        _log(3, [1, 200, 300], [[-30, 0], [5, 0], [40, 40]], included=[(300, "rule1")]),
        _log(4, [1, 200, 300], [[-30, 0], [5, 0], [40, 40]]),
        _log(5, [200, 300], [[5, 0], [40, 40]], removed=[1]),
        _log(6, [200], [[5, 0]], removed=[300]),
        _log(7, [200], [[5, 0]]),
    ]
    inclusion, removal, false_ids = delays(logs, scene, truth)
    # stay in range from k=0, matched at k=2; dep never in range before departure
    assert inclusion == [2]
    # dep's spot re-enters range at k=3, landmark removed at k=5: frames 3, 4, 5
    assert removal == [3, 3]
    assert false_ids == [300]


def test_evaluate_run_fields():
    sf = bundled_scenario("low_clutter")
    m = evaluate_run(run(sf.scene, sf.slam, 2), sf.scene)
    assert isinstance(m, RunMetrics)
    assert 0 < m.platform_position_rmse < 1.5 and 0 < m.platform_heading_rmse < 6
    assert m.inclusion_delays and all(d >= 0 for d in m.inclusion_delays)
    assert not math.isnan(m.landmark_mae)


def test_summary_rows_and_nan_handling():
    runs = [RunMetrics(1.0, 2.0, 0.5, [1, 3], [], 0, 1), RunMetrics(3.0, 4.0, math.nan, [2], [10], 2, 0)]
    s = MonteCarloSummary(runs, [0, 1])
    rows = dict((name, (mean, mx)) for name, mean, mx in s.rows())
    assert rows["platform_position_rmse_m"] == (2.0, None)
    assert rows["landmark_mae_m"] == (0.5, None)
    assert rows["landmark_inclusion_mean_delay"][0] == pytest.approx((2.0 + 2.0) / 2)
    assert rows["landmark_removal_mean_delay"][0] == 10.0
    assert rows["false_landmarks"] == (1.0, 2.0)
    assert rows["missed_landmarks"] == (0.5, 1.0)


def test_monte_carlo_seeds_and_workers():
    sf = bundled_scenario("low_clutter")
    a = monte_carlo(sf.scene, sf.slam, 2, seeds=[5, 6, 7])
    b = monte_carlo(sf.scene, sf.slam, 2, seeds=[5, 6], workers=2)
    assert a.seeds == [5, 6] == b.seeds
    assert a.runs == b.runs
    with pytest.raises(ValueError):
        monte_carlo(sf.scene, sf.slam, 3, seeds=[1])
