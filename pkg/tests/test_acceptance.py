"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
"""
import math
import time

import numpy as np
import pytest
from scipy.linalg import solve_discrete_are

from neckflex.cli import main
from neckflex.detect import connected_components, detect_markers
from neckflex.frameio import encode_pgm16, encode_ppm, read_session, write_session
from neckflex.kinematics import analyze_session
from neckflex.pipeline import calibrate
from neckflex.register import CameraModel, Offset2D, project_to_pixel, reconstruct_3d
from neckflex.reliability import cmc, pearson, reliability_report, sem
from neckflex.synth import SYNTH_DETECT_PARAMS, MotionProfile, NoiseModel, generate_motion, render_session
from neckflex.track import TrackParams, TrackState, associate, default_model, kf_predict, kf_update, track_markers

from conftest import random_bundle
from oracles import brute_assignment, flood_fill_labels

CAM = CameraModel()
NOISE = NoiseModel(pixel_sigma=1.0, depth_sigma=5.0, dropout_prob=0.02)
OFFSET = Offset2D(4.0, -2.0)


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, what):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} | {what}", flush=True)
        return ok
    return emit


def test_1_geometry_round_trip(verdict):
    rng = np.random.default_rng(101)
    n = 10_000
    pix = np.column_stack([rng.uniform(0, 640, n), rng.uniform(0, 480, n)])
    depth = rng.uniform(400, 6000, n)
    # points built straight from angles, independent of the pixel samples
    alpha = np.radians(rng.uniform(-28.5, 28.5, n))
    beta = np.radians(rng.uniform(-21.5, 21.5, n))
    d = rng.uniform(40, 600, n)
    pts = np.column_stack([-d * np.sin(alpha) * np.cos(beta), d * np.sin(beta), d])

    t0 = time.perf_counter()
    px_err = 0.0
    for (a, b), z in zip(pix, depth):
        (a2, b2), z2 = project_to_pixel(CAM, reconstruct_3d(CAM, (a, b), z))
        px_err = max(px_err, abs(a2 - a), abs(b2 - b))
    cm_err = 0.0
    for p in pts:
        q = reconstruct_3d(CAM, *project_to_pixel(CAM, p))
        cm_err = max(cm_err, float(np.max(np.abs(np.subtract(q, p)))))
    elapsed = time.perf_counter() - t0

    ok = px_err <= 1e-9 and cm_err <= 1e-9 and elapsed < 1.0
    verdict(1, ok, f"geometry round-trip: max {px_err:.2e} px, {cm_err:.2e} cm, {elapsed:.2f} s (< 1 s)")
    assert px_err <= 1e-9 and cm_err <= 1e-9
    assert elapsed < 1.0


def test_2_kalman(verdict):
    t0 = time.perf_counter()
    m = default_model(30.0, 200.0, 1.0)
    s = TrackState(np.array([100.0, 5.0, 50.0, -3.0]), np.diag([2.0, 50.0, 2.0, 50.0]))
    fixed = np.array_equal(kf_update(m, s, m.H @ s.x_hat).x_hat, s.x_hat)

    m1 = default_model(30.0, 50.0, 1.0, ndim=1)
    s1 = TrackState(np.zeros(2), np.eye(2))
    for _ in range(500):
        s1 = kf_update(m1, kf_predict(m1, s1), [0.0])
    Pp = m1.A @ s1.P @ m1.A.T + m1.Q
    K = Pp @ m1.H.T / (m1.H @ Pp @ m1.H.T + m1.R)
    X = solve_discrete_are(m1.A.T, m1.H.T, m1.Q, m1.R)
    K_ref = X @ m1.H.T @ np.linalg.inv(m1.H @ X @ m1.H.T + m1.R)
    gain_err = float(np.max(np.abs(K - K_ref)))

    rng = np.random.default_rng(202)
    s = TrackState(np.zeros(4), np.diag(rng.uniform(0.1, 1e3, 4)))
    worst_eig, worst_asym = np.inf, 0.0
    for _ in range(10_000):
        s = kf_predict(m, s)
        if rng.random() > 0.1:
            s = kf_update(m, s, rng.normal(0, 100, 2))
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(s.P).min()))
        worst_asym = max(worst_asym, float(np.max(np.abs(s.P - s.P.T))))
    elapsed = time.perf_counter() - t0

    ok = fixed and gain_err < 1e-9 and worst_eig >= -1e-9 and worst_asym == 0.0 and elapsed < 5
    verdict(2, ok, f"kalman: fixed point {fixed}, |K - K_dare| {gain_err:.1e}, "
                   f"min eig(P) {worst_eig:.3g}, {elapsed:.2f} s (< 5 s)")
    assert fixed and gain_err < 1e-9 and worst_eig >= -1e-9 and worst_asym == 0.0
    assert elapsed < 5


def test_3_association(verdict):
    rng = np.random.default_rng(303)
    instances = []
    for _ in range(1000):
        n, m = rng.integers(1, 6), rng.integers(0, 6)
        instances.append((rng.uniform(0, 80, (n, 2)), rng.uniform(0, 80, (m, 2)), rng.uniform(5, 40, n)))
    t0 = time.perf_counter()
    results = [associate([(i, tuple(p), g) for i, (p, g) in enumerate(zip(P, G))], [tuple(d) for d in D])
               for P, D, G in instances]
    elapsed = time.perf_counter() - t0
    bad = 0
    for (P, D, G), res in zip(instances, results):
        k, cost = brute_assignment(P, D, G)
        mine = sum(np.linalg.norm(P[i] - D[j]) for i, j in res.matches.items())
        if len(res.matches) != k or abs(mine - cost) > 1e-9:
            bad += 1
    ok = bad == 0 and elapsed < 5
    verdict(3, ok, f"association: {1000 - bad}/1000 equal to exhaustive oracle, {elapsed:.2f} s (< 5 s)")
    assert bad == 0 and elapsed < 5


def test_4_detection(verdict):
    truth = generate_motion(MotionProfile(n_cycles=1))
    bundle = render_session(truth, CAM, OFFSET)
    worst = 0.0
    missing = 0
    for i in range(0, truth.profile.frame_count, 6):
        dets = detect_markers(bundle.rgb[i], SYNTH_DETECT_PARAMS, i)
        ddets = detect_markers(bundle.depth[i], SYNTH_DETECT_PARAMS, i)
        for t in truth.trajectories:
            (a, b), _ = project_to_pixel(CAM, t.samples[i].p)
            for found, shift in ((dets, (0.0, 0.0)), (ddets, (OFFSET.dx, OFFSET.dy))):
                if not found:
                    missing += 1
                    continue
                worst = max(worst, min(math.hypot(d.centroid[0] - a - shift[0], d.centroid[1] - b - shift[1])
                                       for d in found))
    rng = np.random.default_rng(404)
    mismatches = 0
    for _ in range(500):
        mask = rng.random((64, 64)) < rng.uniform(0.05, 0.6)
        mine = connected_components(mask)
        ref = flood_fill_labels(mask)
        ref_key = sorted((len(c), round(sum(x for _, x in c) / len(c), 9), round(sum(y for y, _ in c) / len(c), 9))
                         for c in ref)
        mine_key = sorted((b.area, round(b.centroid[0], 9), round(b.centroid[1], 9)) for b in mine)
        mismatches += mine_key != ref_key
    ok = worst <= 0.5 and missing == 0 and mismatches == 0
    verdict(4, ok, f"detection: worst centroid error {worst:.3f} px (<= 0.5), "
                   f"components {500 - mismatches}/500 equal to flood fill")
    assert worst <= 0.5 and missing == 0 and mismatches == 0


def _session(profile, static_seed):
    static = MotionProfile(trial_kind="static", noise=profile.noise, seed=static_seed)
    cal = calibrate(render_session(generate_motion(static), CAM, OFFSET), CAM, SYNTH_DETECT_PARAMS)
    bundle = render_session(generate_motion(profile), CAM, OFFSET)
    trajs = track_markers(bundle, cal.initial_px, cal.initial_depth, cal.offset, CAM,
                          SYNTH_DETECT_PARAMS, TrackParams())
    return analyze_session(trajs, cal.reference, session_id=profile.session_id)


def test_5_end_to_end(verdict):
    t0 = time.perf_counter()
    rep = _session(MotionProfile(amplitude=46.0, period=8.0, n_cycles=3, noise=NOISE, seed=11), 1)
    elapsed = time.perf_counter() - t0
    target = -(2 * math.pi / 8) ** 2
    rel = rep.harmony / target - 1
    ok = abs(rep.rom - 92) <= 2 and abs(rel) <= 0.05 and abs(rep.mean_omega) <= 0.1 and elapsed < 60
    verdict(5, ok, f"end-to-end: ROM {rep.rom:.2f} deg (92 +/- 2), harmony {rep.harmony:.4f} "
                   f"({100 * rel:+.2f}% of {target:.4f}), mean omega {rep.mean_omega:+.3f} deg/s "
                   f"(+/- 0.1), {elapsed:.1f} s (< 60 s)")
    assert abs(rep.rom - 92) <= 2
    assert abs(rel) <= 0.05
    assert abs(rep.mean_omega) <= 0.1
    assert elapsed < 60


def test_6_reliability(verdict):
    a = np.sin(np.linspace(0, 2 * np.pi, 101)) * 40 + np.random.default_rng(6).normal(0, 1, 101)
    exact = pearson(a, a) == 1.0 and sem(a, a) == 0.0 and cmc([a, a, a]) == 1.0

    t0 = time.perf_counter()
    reports = [_session(MotionProfile(n_cycles=1, noise=NOISE, seed=seed, session_id=str(k + 1)), 50 + seed)
               for k, seed in enumerate((61, 62, 63))]
    rel = reliability_report(reports)
    elapsed = time.perf_counter() - t0
    min_r = min(r.pearson for r in rel.rows)
    min_c = min(r.cmc for r in rel.rows)
    ok = exact and min_r > 0.95 and min_c > 0.9 and elapsed < 90
    verdict(6, ok, f"reliability: identities exact {exact}; over phi, omega, x, y: "
                   f"min Pearson {min_r:.4f} (> 0.95), min CMC {min_c:.4f} (> 0.9), {elapsed:.1f} s (< 90 s)")
    assert exact
    assert min_r > 0.95 and min_c > 0.9
    assert elapsed < 90


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_7_determinism(verdict, tmp_path):
    (tmp_path / "cfg.json").write_text(
        '{"synth": {"n_cycles": 0.5, "static_duration": 1.2,'
        ' "noise": {"pixel_sigma": 1.0, "depth_sigma": 5.0, "dropout_prob": 0.02}}}')
    codes = []
    for run in ("a", "b"):
        codes.append(main(["synthesize", "--config", str(tmp_path / "cfg.json"), "--seed", "7",
                           "--out", str(tmp_path / run)]))
    same_synth = _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")
    cfg = str(tmp_path / "a" / "config.json")
    codes.append(main(["calibrate", str(tmp_path / "a" / "static"), "--config", cfg, "--out", str(tmp_path / "cal")]))
    for run in ("x", "y"):
        codes.append(main(["analyze", str(tmp_path / "a" / "motion"), str(tmp_path / "cal" / "calibration.json"),
                           "--config", cfg, "--out", str(tmp_path / run)]))
    same_analyze = all((tmp_path / "x" / f).read_bytes() == (tmp_path / "y" / f).read_bytes()
                       for f in ("report.json", "series.csv"))
    ok = same_synth and same_analyze and all(c in (0, 3) for c in codes)
    verdict(7, ok, f"determinism: synthesize --seed 7 identical {same_synth}, "
                   f"analyze report.json/series.csv identical {same_analyze}, exit codes {codes}")
    assert all(c in (0, 3) for c in codes)
    assert same_synth and same_analyze


def test_8_format_fidelity(verdict, tmp_path):
    rng = np.random.default_rng(808)
    failures = 0
    for k in range(20):
        w, h = 2 * int(rng.integers(1, 40)), 2 * int(rng.integers(1, 30))
        b = random_bundle(rng, w, h, int(rng.integers(1, 5)), fps=float(rng.choice([15.0, 30.0])),
                          session_id=str(k), trial_kind=str(rng.choice(["static", "motion"])))
        assert b.depth[0].values.max() > 255  # both bytes of the 16-bit samples in play
        write_session(b, tmp_path / f"b{k}")
        back = read_session(tmp_path / f"b{k}")
        bytes_ok = all(encode_ppm(x) == encode_ppm(y) and encode_pgm16(u) == encode_pgm16(v)
                       for x, y, u, v in zip(b.rgb, back.rgb, b.depth, back.depth))
        if not (back == b and back.manifest == b.manifest and bytes_ok):
            failures += 1
    ok = failures == 0
    verdict(8, ok, f"format fidelity: {20 - failures}/20 random bundles round-trip bit-exact")
    assert failures == 0
