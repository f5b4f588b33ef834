"""Acceptance criteria, each checked at its stated tolerance."""

import math
import time

import numpy as np
from scipy.stats import norm

from conftest import grid_points, rotate_about
from tactile_rotation import cli
from tactile_rotation.contour import contour_rotation, extract_contour
from tactile_rotation.control import init_controller, run_episode
from tactile_rotation.cor import Verdict, estimate_cor, rotation_angle
from tactile_rotation.data import IntensityFrame, PipelineConfig, PointCloud, write_point_cloud
from tactile_rotation.evaluate import (
    blob_corpus,
    default_corpus,
    evaluate_corpus,
    evaluate_items,
    run_closed_loop,
    write_corpus,
)
from tactile_rotation.geometry import measure_object, segment_plane
from tactile_rotation.motion import MotionVectorSet
from tactile_rotation.pipeline import process_sequence
from tactile_rotation.sim import SimObject, SimParams, oracle_plant, simulate_grasp, table_scene

CFG = PipelineConfig()


def test_criterion_01_exact_recovery(criterion):
    rng = np.random.default_rng(101)
    cases = []
    for _ in range(100):
        n = int(rng.integers(3, 51))
        pts = rng.uniform((0, 0), (640, 480), (n, 2))
        cor = rng.uniform((0, 0), (640, 480))
        angle = rng.uniform(0.5, 90.0)
        cases.append((pts, cor, angle))
    t0 = time.perf_counter()
    cor_err = angle_err = 0.0
    for pts, cor, angle in cases:
        v = MotionVectorSet.from_pair(pts, rotate_about(pts, cor, angle))
        est, _ = estimate_cor(v)
        cor_err = max(cor_err, float(np.linalg.norm(np.subtract(est, cor))))
        angle_err = max(angle_err, abs(rotation_angle(v, est) - angle))
    elapsed = time.perf_counter() - t0
    ok = cor_err < 1e-6 and angle_err < 1e-6 and elapsed < 1.0
    criterion(1, ok, f"max COR err {cor_err:.2e} px, max angle err {angle_err:.2e} deg, {elapsed:.3f} s")
    assert ok


def grid_oracle(start, end, center, half=5.0, step=0.1):
    # brute-force minimum of the summed squared distance-weighted bisector residual
    offs = np.arange(-half, half + step / 2, step)
    gx, gy = np.meshgrid(center[0] + offs, center[1] + offs)
    cand = np.column_stack([gx.ravel(), gy.ravel()])
    d = start - end
    keep = np.linalg.norm(d, axis=1) > CFG.noise_floor_px
    d, mid = d[keep], 0.5 * (start[keep] + end[keep])
    r = cand @ d.T - np.einsum("ij,ij->i", d, mid)
    return cand[np.argmin(np.sum(r * r, axis=1))]


def test_criterion_02_noisy_recovery_vs_oracle(criterion):
    rng = np.random.default_rng(202)
    grid = grid_points(5, 5, spacing=20.0, origin=(200.0, 150.0))
    t0 = time.perf_counter()
    gaps, angle_errs = [], []
    for _ in range(100):
        cor = rng.uniform((200, 150), (280, 230))
        end = rotate_about(grid, cor, 7.0) + rng.normal(0, 0.2, grid.shape)
        v = MotionVectorSet.from_pair(grid, end)
        est, _ = estimate_cor(v)
        oracle = grid_oracle(grid, end, np.round(est, 1))
        gaps.append(float(np.max(np.abs(np.subtract(est, oracle)))))
        angle_errs.append(abs(rotation_angle(v, est) - 7.0))
    elapsed = time.perf_counter() - t0
    med = float(np.median(angle_errs))
    ok = max(gaps) <= 0.1 and med <= 0.3 and elapsed < 30.0
    criterion(2, ok, f"max |LSQ - oracle| {max(gaps):.3f} px, median angle err {med:.3f} deg, {elapsed:.2f} s")
    assert ok


_DEFAULT = {}


def default_report():
    if "report" not in _DEFAULT:
        _DEFAULT["report"] = evaluate_items(default_corpus(0))
    return _DEFAULT["report"]


def test_criterion_03_angle_accuracy(criterion):
    s = default_report().summary
    ok = s.mean_abs_angle_error_deg <= 3.96 and s.mean_abs_angle_error_under10_deg <= 2.69
    criterion(
        3, ok,
        f"MAE {s.mean_abs_angle_error_deg:.3f} deg (<= 3.96), under 10 deg {s.mean_abs_angle_error_under10_deg:.3f} deg (<= 2.69)",
    )
    assert ok


def test_criterion_04_onset_delay(criterion):
    s = default_report().summary
    ok = s.onset_within_tolerance >= 0.90
    criterion(4, ok, f"onset within 5 frames on {s.onset_within_tolerance:.1%} of {s.n_rotational} rotational sequences")
    assert ok


def test_criterion_05_classification(criterion):
    s = default_report().summary
    rng = np.random.default_rng(505)
    quiet = 0
    for k in range(500):
        obj = SimObject(cog_offset=float(rng.uniform(-0.05, 0.05)))
        sim = simulate_grasp(obj, SimParams(seed=50_000 + k), obj.cog_offset, 100)
        quiet += process_sequence(sim.frames).verdict.verdict is Verdict.STABLE_GRASP
    ok = s.n_sequences == 142 and s.accuracy >= 0.90 and quiet / 500 >= 0.95
    criterion(5, ok, f"accuracy {s.accuracy:.1%} on {s.n_sequences} sequences, static suite {quiet}/500 stable")
    assert ok


def ellipse_frames(a, b, angle_deg, h=120, w=160):
    ys, xs = np.mgrid[0:h, 0:w].astype(float)
    th = np.radians(angle_deg)
    dx, dy = xs - w / 2, ys - h / 2
    u = np.cos(th) * dx + np.sin(th) * dy
    v = -np.sin(th) * dx + np.cos(th) * dy
    mask = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    ref = np.full((h, w, 3), 90, dtype=np.uint8)
    px = ref.copy()
    px[..., 1][mask] += 70
    return IntensityFrame(px), IntensityFrame(ref), int(mask.sum())


def test_criterion_06_contour_mode(criterion):
    blob = evaluate_items(blob_corpus(0)).summary
    rng = np.random.default_rng(606)
    errors, n_sets, smallest = [], 0, math.inf
    while n_sets < 100:
        a = rng.uniform(14, 35)
        b = rng.uniform(5, a / 1.5)
        phi, span = rng.uniform(0, 180), rng.uniform(5, 30)
        schedule = np.linspace(0, span, 11)
        rendered = [ellipse_frames(a, b, phi + s) for s in schedule]
        area = min(r[2] for r in rendered)
        if area < 400:
            continue
        smallest = min(smallest, area)
        contours = [extract_contour(frame, ref, CFG) for frame, ref, _ in rendered]
        errors.extend(np.abs(np.array(contour_rotation(contours)) - schedule))
        n_sets += 1
    ellipse_mae = float(np.mean(errors))
    ok = blob.mean_abs_angle_error_deg <= 3.33 and ellipse_mae <= 1.0
    criterion(
        6, ok,
        f"SmallBlob corpus MAE {blob.mean_abs_angle_error_deg:.3f} deg (<= 3.33), "
        f"ellipses >= {smallest} px MAE {ellipse_mae:.3f} deg (<= 1)",
    )
    assert ok


def test_criterion_07_geometry(criterion):
    L = 0.30
    rel = [measure_object(table_scene(L, axis_deg=17.0 * s, seed=s)).length_L / (0.95 * L) - 1 for s in range(20)]
    worst = float(np.max(np.abs(rel)))
    hits = total = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        plane = np.column_stack([rng.uniform(-0.3, 0.3, (1000, 2)), rng.normal(0, 0.002, 1000)])
        box = np.column_stack([rng.uniform(-0.05, 0.05, (200, 2)), rng.uniform(0.02, 0.06, 200)])
        _, inliers = segment_plane(PointCloud(np.vstack([plane, box])), inlier_threshold=0.005, seed=seed)
        hits += int(inliers[:1000].sum())
        total += 1000
    rate = hits / total
    ok = worst <= 0.02 and rate >= 0.98
    criterion(
        7, ok,
        f"rod length worst deviation {worst:.2%} from 0.95 L over 20 scenes, "
        f"RANSAC inliers {rate:.2%} pooled over 100 seeds (ideal {2 * norm.cdf(2.5) - 1:.2%})",
    )
    assert ok


def test_criterion_08_controller(criterion):
    L, r = 0.30, 0.30 / 24
    worst, inside = 0, True
    for cog in np.linspace(-0.45 * L, 0.45 * L, 50):
        ep = run_episode(init_controller(L), oracle_plant(SimObject(length=L, cog_offset=cog, stability_radius=r)))
        worst = max(worst, ep.regrasp_count if ep.converged else 99)
        inside &= abs(ep.final_offset - cog) <= r
    loop = run_closed_loop(SimObject(), n_episodes=100, seed=0)
    tight = run_closed_loop(SimObject(stability_radius=r), n_episodes=100, seed=0)
    ok = worst <= 6 and inside and loop.success_rate >= 0.95 and loop.mean_regrasps <= 2.5
    criterion(
        8, ok,
        f"oracle grid max {worst} regrasps, all final offsets inside radius: {inside}; "
        f"pipeline rod success {loop.success_rate:.0%}, mean {loop.mean_regrasps:.2f} regrasps "
        f"(at radius L/24: success {tight.success_rate:.0%}, mean {tight.mean_regrasps:.2f})",
    )
    assert ok


def test_criterion_09_throughput(criterion, tmp_path):
    params = SimParams(image_width=340, image_height=240)
    items = [it for it in default_corpus(9, n_rotational=4, n_stable=2, base=params)]
    n_markers = len(items[0].simulate().frames[0].ids)
    write_corpus(items, tmp_path / "seqs")
    report = evaluate_corpus(tmp_path / "seqs", out_dir=tmp_path / "out", timing=True)
    summary = dict(line.split(",") for line in (tmp_path / "out" / "summary.csv").read_text().splitlines()[1:])
    ms = float(summary["ms_per_frame"])
    ok = n_markers >= 200 and ms <= 45.0 and ms == round(report.summary.ms_per_frame, 6)
    criterion(9, ok, f"{ms:.3f} ms/frame with {n_markers} markers (<= 45), reported in summary.csv")
    assert ok


def test_criterion_10_determinism(criterion, tmp_path):
    outputs = {}
    for tag in ("first", "second"):
        out = tmp_path / tag
        seqs = out / "seqs"
        assert cli.main(["--seed", "3", "--out", str(seqs), "simulate", "--corpus", "default"]) == 0
        assert cli.main(["--seed", "3", "--out", str(seqs), "simulate", "--corpus", "blob", "--count", "3"]) == 0
        assert cli.main(["--out", str(out / "est"), "estimate", str(seqs / "rot_000.seq")]) == 0
        assert cli.main(["--out", str(out / "est"), "estimate", str(seqs / "blob_000.seq")]) == 0
        assert cli.main(["--out", str(out / "eval"), "evaluate", str(seqs)]) == 0
        assert cli.main(["--seed", "3", "--out", str(out / "loop"), "regrasp", "--episodes", "10"]) == 0
        cloud = write_point_cloud(out / "scene.csv", table_scene(0.25, noise_m=0.002, seed=3))
        assert cli.main(["--seed", "3", "--out", str(out / "geo"), "length", str(cloud)]) == 0
        outputs[tag] = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*.csv"))}
    same = outputs["first"] == outputs["second"]
    criterion(10, same, f"{len(outputs['first'])} CSV files byte-identical across two CLI runs: {same}")
    assert same
