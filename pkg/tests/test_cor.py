import logging

import numpy as np
import pytest

from conftest import grid_points, rotate_about
from tactile_rotation.cor import (
    Orientation,
    RotationEstimate,
    Verdict,
    assess_stability,
    cor_objective,
    estimate_cor,
    estimate_rotation,
    orientation_vote,
    rotation_angle,
)
from tactile_rotation.data import PipelineConfig
from tactile_rotation.errors import DegenerateMotion, NoUsableMarkers, TooFewMarkers
from tactile_rotation.motion import MotionVectorSet, build_vectors
from tactile_rotation.sim import SimObject, SimParams, simulate_grasp

CFG = PipelineConfig()


def pair(start, end):
    return MotionVectorSet.from_pair(start, end)


def oracle_cor(start, end, center_guess, half_width=3.0, step=0.1):
    """Brute-force minimizer of the weighted bisector residual on a square grid."""
    delta = start - end
    mid = 0.5 * (start + end)
    offsets = np.arange(-half_width, half_width + step / 2, step)
    gx, gy = np.meshgrid(center_guess[0] + offsets, center_guess[1] + offsets)
    cand = np.column_stack([gx.ravel(), gy.ravel()])
    # residual of every bisector at every candidate
    r = (cand[:, None, :] - mid[None, :, :]) * delta[None, :, :]
    cost = np.sum(r.sum(axis=2) ** 2, axis=1)
    k = int(np.argmin(cost))
    on_edge = np.any(np.isclose(np.abs(cand[k] - center_guess), half_width))
    return cand[k], on_edge


def test_three_markers_quarter_turn():
    start = np.array([[10.0, 0.0], [0.0, 10.0], [-10.0, 0.0]])
    end = rotate_about(start, np.zeros(2), 90.0)
    cor, residual = estimate_cor(pair(start, end))
    assert cor == pytest.approx((0.0, 0.0), abs=1e-12)
    assert residual == pytest.approx(0.0, abs=1e-12)
    assert rotation_angle(pair(start, end), cor) == pytest.approx(90.0, abs=1e-9)


def test_noisy_grid_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    center = np.array([32.0, 18.0])
    start = grid_points(5, 5, 20.0, (-8.0, -22.0))
    end = rotate_about(start, center, 7.0)
    start = start + rng.normal(0, 0.2, start.shape)
    end = end + rng.normal(0, 0.2, end.shape)
    v = pair(start, end)
    cor, _ = estimate_cor(v)
    best, on_edge = oracle_cor(start, end, center)
    assert not on_edge
    assert np.max(np.abs(np.array(cor) - best)) <= 0.1
    assert rotation_angle(v, cor) == pytest.approx(7.0, abs=0.3)


def test_noisy_grid_cor_distance_to_truth():
    # per-seed scatter is about 0.9 px at this noise level, so the bound is on the median
    center = np.array([32.0, 18.0])
    dist = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        start = grid_points(5, 5, 20.0, (-8.0, -22.0))
        end = rotate_about(start, center, 7.0) + rng.normal(0, 0.2, start.shape)
        start = start + rng.normal(0, 0.2, start.shape)
        cor, _ = estimate_cor(pair(start, end))
        dist.append(np.hypot(*(np.array(cor) - center)))
    assert np.median(dist) < 1.0


def test_objective_helper_agrees_with_oracle_cost():
    rng = np.random.default_rng(1)
    start = grid_points()
    end = rotate_about(start, np.array([130.0, 150.0]), 5.0) + rng.normal(0, 0.2, start.shape)
    cor, _ = estimate_cor(pair(start, end))
    near = np.array(cor) + rng.normal(0, 1.0, (20, 2))
    assert np.all(cor_objective(near, start, end) >= cor_objective([cor], start, end)[0] - 1e-9)


def test_parallel_motion_is_degenerate():
    start = grid_points()
    with pytest.raises(DegenerateMotion):
        estimate_cor(pair(start, start + [3.0, 1.0]))


def test_too_few_moving_markers():
    start = grid_points()
    end = start.copy()
    end[0] += 2.0
    with pytest.raises(TooFewMarkers):
        estimate_cor(pair(start, end))


def test_unweighted_rows_also_exact():
    start = grid_points()
    end = rotate_about(start, np.array([111.0, 133.0]), 12.0)
    cor, _ = estimate_cor(pair(start, end), weighted=False)
    assert cor == pytest.approx((111.0, 133.0), abs=1e-8)


def test_stable_reference_uses_mc():
    m0 = grid_points()
    mc = m0 + [0.0, 4.0]  # press offset that is not part of the rotation
    mt = rotate_about(mc, np.array([140.0, 140.0]), 6.0)
    v = MotionVectorSet(np.arange(len(m0)), m0, mc, mt)
    cor, _ = estimate_cor(v, reference="stable")
    assert cor == pytest.approx((140.0, 140.0), abs=1e-8)
    assert rotation_angle(v, cor, reference="stable") == pytest.approx(6.0, abs=1e-9)


def test_zero_motion_angle():
    pts = grid_points()
    assert rotation_angle(pair(pts, pts), (0.0, 0.0)) == 0.0


def test_markers_at_center_are_excluded():
    pts = np.array([[5.0, 5.0], [5.5, 5.0]])
    with pytest.raises(NoUsableMarkers):
        rotation_angle(pair(pts, pts), (5.0, 5.0))


def test_unanimous_vote():
    start = grid_points()
    center = start.mean(axis=0)
    end = rotate_about(start, center, 5.0)
    orientation, cw, ccw = orientation_vote(pair(start, end), center, CFG)
    assert orientation is Orientation.CW
    assert ccw == 0 and cw == len(start) - 1  # the marker on the center has no moment


def test_counter_clockwise_vote():
    start = grid_points()
    center = start.mean(axis=0) + 0.5
    orientation, cw, ccw = orientation_vote(pair(start, rotate_about(start, center, -5.0)), center, CFG)
    assert orientation is Orientation.CCW and cw == 0


def test_close_vote_is_ambiguous():
    # 12 markers turning clockwise, 11 counter-clockwise about the origin
    angles = np.linspace(0, 2 * np.pi, 23, endpoint=False)
    start = 50 * np.column_stack([np.cos(angles), np.sin(angles)])
    tangent = np.column_stack([-np.sin(angles), np.cos(angles)])
    sign = np.array([1.0] * 12 + [-1.0] * 11)
    end = start + sign[:, None] * tangent
    orientation, cw, ccw = orientation_vote(pair(start, end), (0.0, 0.0), CFG)
    assert (cw, ccw) == (12, 11)
    assert orientation is Orientation.AMBIGUOUS


def test_dominance_ratio_boundary():
    angles = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    start = 50 * np.column_stack([np.cos(angles), np.sin(angles)])
    tangent = np.column_stack([-np.sin(angles), np.cos(angles)])
    sign = np.array([1.0] * 8 + [-1.0] * 4)
    end = start + sign[:, None] * tangent
    orientation, cw, ccw = orientation_vote(pair(start, end), (0.0, 0.0), CFG)
    assert (cw, ccw) == (8, 4) and orientation is Orientation.CW


def test_static_creep_is_ambiguous():
    cfg = CFG.replace(motion_reference="initial")
    ambiguous = 0
    for seed in range(500):
        sim = simulate_grasp(SimObject(), SimParams(seed=seed), 0.0, 60)
        f = sim.frames
        v = build_vectors(f[0], f[17], f[-1], sim.contact_ids)
        ambiguous += estimate_rotation(v, cfg).orientation is Orientation.AMBIGUOUS
    assert ambiguous >= 475


def _estimate(angle, orientation):
    signed = {Orientation.CW: angle, Orientation.CCW: -angle}.get(orientation, 0.0)
    return RotationEstimate((0.0, 0.0), angle, orientation, signed, 0, 0, 0.0, 10)


def test_stability_threshold():
    assert assess_stability(_estimate(3.0, Orientation.CW), CFG).verdict is Verdict.STABLE_GRASP
    assert assess_stability(_estimate(8.0, Orientation.CCW), CFG).verdict is Verdict.ROTATIONAL_FAILURE
    assert assess_stability(_estimate(5.0, Orientation.CW), CFG).verdict is Verdict.STABLE_GRASP


def test_ambiguous_vote_vetoes_and_logs(caplog):
    with caplog.at_level(logging.WARNING):
        verdict = assess_stability(_estimate(40.0, Orientation.AMBIGUOUS), CFG)
    assert verdict.verdict is Verdict.STABLE_GRASP
    assert verdict.measured_angle_deg == 40.0
    assert "vetoed" in caplog.text


def test_estimate_signs_and_counts():
    start = grid_points()
    center = np.array([140.0, 140.0])
    est = estimate_rotation(pair(start, rotate_about(start, center, -9.0)), CFG.replace(motion_reference="initial"))
    assert est.orientation is Orientation.CCW
    assert est.signed_angle_deg == pytest.approx(-9.0, abs=1e-9)
    assert est.votes_cw + est.votes_ccw <= est.n_markers
    assert est.residual >= 0
