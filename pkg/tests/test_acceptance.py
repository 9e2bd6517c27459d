"""Acceptance criteria, each at its stated tolerance.

Every test records its outcome in ``conftest.ACCEPTANCE``; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import math
import statistics
import time
from dataclasses import replace

import numpy as np

from conftest import ACCEPTANCE, CALIBRATION_DISTANCES, calibrate_on
from filagauge.acquisition import load_frame
from filagauge.calibration import project
from filagauge.measurement import build_log, measure_frame, measure_paths, write_log_csv
from filagauge.segmentation import DEFAULT_THRESHOLD, detect_edges
from filagauge.spool import SpoolSpec, layer_length, total_length
from filagauge.synth import (
    SynthScene,
    default_rig,
    profile_from_steps,
    render_band,
    render_frame,
    render_sequence,
)
from filagauge.texture import TextureBaseline, anomaly_score


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    assert ok, f"{key}: {detail}"


def test_01_spool_identity():
    rng = np.random.default_rng(1)
    specs = [SpoolSpec(rng.uniform(20, 100), int(rng.integers(1, 51)), int(rng.integers(1, 21)),
                       rng.uniform(1, 3)) for _ in range(1000)]
    t0 = time.perf_counter()
    worst = 0.0
    for s in specs:
        direct = math.fsum(layer_length(s, k) for k in range(1, s.m + 1))
        worst = max(worst, abs(total_length(s) - direct) / direct)
    elapsed = time.perf_counter() - t0
    record("1 spool identity", worst <= 1e-9 and elapsed < 1.0,
           f"max rel err {worst:.2e} (<= 1e-9), {elapsed:.3f} s (< 1 s)")


def test_02_pinhole_law():
    rng = np.random.default_rng(2)
    worst = 0.0
    exact = True
    for _ in range(2000):
        W, F, L = rng.uniform(0.1, 10), rng.uniform(1, 50), rng.uniform(1, 1000)
        k = rng.uniform(0.1, 10)
        want = project(W, F, L) / k
        worst = max(worst, abs(project(W, F, k * L) - want) / want)
        exact &= project(W, F, F) == W
    record("2 pinhole law", worst <= 1e-12 and exact,
           f"max rel err {worst:.2e} (<= 1e-12), p(W,F,F)==W: {exact}")


def pooled(scene, rig, calib, count):
    fms = [measure_frame(render_frame(scene, i)[0], rig, calib, with_patch=False)
           for i in range(count)]
    return fms


def test_03_noise_free_recovery(scene, rig, calibration):
    s = replace(scene, distance_jitter_mm=3.0, seed=30)
    t0 = time.perf_counter()
    fms = pooled(s, rig, calibration, 200)
    elapsed = time.perf_counter() - t0
    mean = np.mean([fm.pooled_mean for fm in fms])
    per = {p: np.mean([fm.projection_mean(p) for fm in fms]) for p in ("main", "upper", "lower")}
    worst = max(abs(v - 1.75) for v in per.values())
    ok = abs(mean - 1.75) <= 0.01 and worst <= 0.02 and elapsed < 30
    record("3 noise-free diameter", ok,
           f"pooled {mean:.4f} mm (+-0.01), per-projection max err {worst:.4f} (+-0.02), "
           f"{elapsed:.1f} s (< 30 s)")


def test_04_noisy_recovery(scene, rig, calibration):
    s = replace(scene, distance_jitter_mm=3.0, noise_sigma=5.0, seed=40)
    fms = pooled(s, rig, calibration, 200)
    inside = np.mean([abs(fm.pooled_mean - 1.75) <= 0.05 for fm in fms])
    record("4 noisy diameter", inside >= 0.95, f"{inside:.1%} of frames within +-0.05 mm (>= 95%)")


def test_05_ovality(scene, rig, calibration):
    ell = SynthScene(major_mm=3.0, minor_mm=2.9, nominal_mm=3.0, seed=50)
    ell_rig = default_rig(ell)
    ell_cal = calibrate_on(SynthScene(major_mm=3.0, minor_mm=3.0, nominal_mm=3.0), ell_rig, 3.0)
    ov = np.mean([measure_frame(render_frame(ell, i)[0], ell_rig, ell_cal,
                                with_patch=False).mean_ovality for i in range(20)])
    circ = [measure_frame(render_frame(scene, i)[0], rig, calibration,
                          with_patch=False).mean_ovality for i in range(20)]
    ok = abs(ov - 10 / 3) <= 0.3 and max(circ) < 0.5
    record("5 ovality", ok, f"ellipse {ov:.3f}% (3.33 +- 0.3), circular max {max(circ):.3f}% (< 0.5)")


def test_06_distance_invariance(scene, rig, calibration):
    lo, hi = min(CALIBRATION_DISTANCES), max(CALIBRATION_DISTANCES)
    pad = 0.1 * (hi - lo)
    distances = np.linspace(lo - pad, hi + pad, 13)
    means = []
    for L in distances:
        fms = pooled(replace(scene, distance_mm=float(L), seed=60), rig, calibration, 3)
        means.append(np.mean([fm.pooled_mean for fm in fms]))
    spread = (max(means) - min(means)) / np.mean(means)
    record("6 distance invariance", spread < 0.01,
           f"L {distances[0]:.1f}..{distances[-1]:.1f} mm, spread {spread:.3%} (< 1%)")


def test_07_defect_localisation(scene, rig, calibration):
    profile = profile_from_steps([{"from_frame": 10, "d_mm": 1.90},
                                  {"from_frame": 30, "d_mm": 1.75}], scene)
    s = replace(scene, seed=70)
    fms = [measure_frame(render_frame(s, i, profile(i))[0], rig, calibration, with_patch=False)
           for i in range(40)]
    log = build_log(fms, replace(rig, feed_rate_mm_s=10.0, period_s=1.0))
    got = [(d.start_mm, d.end_mm, d.reason) for d in log.defects]
    ok = (len(got) == 1 and abs(got[0][0] - 100) <= 10 and abs(got[0][1] - 300) <= 10)
    record("7 defect localisation", ok, f"intervals {got} (one, within 10 mm of [100, 300])")


def test_08_subpixel_edges():
    rng = np.random.default_rng(8)
    e_top = e_bot = e_w = 0.0
    for _ in range(1000):
        top = rng.uniform(5, 40)
        width = rng.uniform(4, 60)
        bg = rng.uniform(150, 255)
        # contrast of at least twice the threshold, so an edge split evenly
        # over two pixels still crosses it
        fg = rng.uniform(0, bg - 2 * DEFAULT_THRESHOLD)
        col = render_band(128, top, top + width, bg, fg, shading=rng.uniform(0, 0.5))
        e = detect_edges(col)
        e_top = max(e_top, abs(e.top_edge - top))
        e_bot = max(e_bot, abs(e.bottom_edge - top - width))
        e_w = max(e_w, abs(e.width_px - width))
    ok = e_top <= 0.25 and e_bot <= 0.25 and e_w <= 0.5
    record("8 sub-pixel edges", ok,
           f"max edge err {max(e_top, e_bot):.4f} px (<= 0.25), width {e_w:.4f} px (<= 0.5)")


def test_09_texture_score():
    rng = np.random.default_rng(9)
    base = TextureBaseline()
    for _ in range(10):
        base.update(120 + 2 * rng.standard_normal((96, 600)))
    clean = np.repeat(base.mean[:, None], 600, axis=1)
    dirty = clean.copy()
    hit = rng.choice(dirty.size, int(0.05 * dirty.size), replace=False)
    dirty.flat[hit] += 10 * base.std[hit // 600] * rng.choice([-1, 1], hit.size)
    s_dirty = anomaly_score(dirty, base, update=False)
    s_clean = anomaly_score(clean, base, update=False)
    ok = abs(s_dirty - 0.05) <= 0.01 and s_clean == 0
    record("9 texture score", ok, f"injected {s_dirty:.4f} (0.05 +- 0.01), identical {s_clean}")


def test_10_determinism_and_speed(tmp_path, scene, rig, calibration):
    s = replace(scene, noise_sigma=5.0, seed=100)
    render_sequence(s, 16, tmp_path / "seq")
    paths = sorted((tmp_path / "seq").glob("frame_*.png"))
    for k in (1, 2):
        write_log_csv(measure_paths(paths, rig, calibration), tmp_path / f"log{k}.csv")
    same = (tmp_path / "log1.csv").read_bytes() == (tmp_path / "log2.csv").read_bytes()
    times = []
    for i, p in enumerate(paths):
        t0 = time.perf_counter()
        measure_frame(load_frame(p, index=i), rig, calibration)
        times.append(time.perf_counter() - t0)
    med = statistics.median(times) * 1000
    record("10 determinism and throughput", same and med <= 50,
           f"byte-identical CSV: {same}, median frame {med:.1f} ms (<= 50 ms)")
