import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filagauge.calibration import project
from filagauge.errors import ConfigError, SceneOutOfFrame
from filagauge.measurement import measure_pixels
from filagauge.synth import (
    SynthScene,
    area_coverage,
    ellipse_extents,
    load_ground_truth,
    profile_from_steps,
    render_band,
    render_frame,
    render_sequence,
)


def test_empty_scene_is_uniform():
    frame, gt = render_frame(SynthScene(filament=False))
    assert (frame.pixels == 200).all()
    assert gt.true_d_mm == 1.75


def test_main_band_width_matches_projection(scene, rig):
    frame, gt = render_frame(scene, 0)
    want = project(1.75, 2.8, 50.0) * 350
    assert gt.widths_px["main"] == pytest.approx(want, abs=1e-9)
    pm = measure_pixels(frame, rig)
    assert np.nanmean(pm.width_px("main")) == pytest.approx(want, abs=0.3)


def test_mirror_bands_sit_at_mirror_depth(scene, rig):
    frame, gt = render_frame(scene, 0)
    # virtual images at depth mount + offset = 60 mm
    want = project(1.75, 2.8, 60.0) * 350
    pm = measure_pixels(frame, rig)
    for p in ("upper", "lower"):
        assert gt.widths_px[p] == pytest.approx(want, abs=1e-9)
        assert np.nanmean(pm.width_px(p)) == pytest.approx(want, abs=0.3)


def brute_extents(major, minor, theta, n=200_001):
    t = np.linspace(0, 2 * np.pi, n)
    x = 0.5 * major * np.cos(t)
    y = 0.5 * minor * np.sin(t)
    ry = x * math.cos(theta) - y * math.sin(theta)
    rz = x * math.sin(theta) + y * math.cos(theta)
    return np.ptp(ry), np.ptp(rz)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 3.0), st.floats(0.5, 1.0), st.floats(0, math.pi))
def test_ellipse_extents_match_sampled_outline(major, ratio, theta):
    got = ellipse_extents(major, major * ratio, theta)
    want = brute_extents(major, major * ratio, theta)
    assert got == pytest.approx(want, abs=1e-6)


def test_ellipse_ground_truth():
    _, gt = render_frame(SynthScene(major_mm=3.0, minor_mm=2.9, nominal_mm=3.0))
    assert gt.true_d_mm == pytest.approx(2.95)
    assert gt.true_ovality_pct == pytest.approx(10 / 3)


def test_area_coverage_oracle():
    cov = area_coverage(5, 1.25, 3.5)
    np.testing.assert_allclose(cov, [0, 0.75, 1, 0.5, 0])


def test_render_band_flat_levels():
    col = render_band(10, 2.0, 6.0, 200, 60)
    np.testing.assert_allclose(col, [200, 200, 60, 60, 60, 60, 200, 200, 200, 200])


def test_render_is_deterministic():
    s = SynthScene(noise_sigma=5, distance_jitter_mm=2, seed=3)
    a, ga = render_frame(s, 9)
    b, gb = render_frame(s, 9)
    np.testing.assert_array_equal(a.pixels, b.pixels)
    assert ga == gb
    c, _ = render_frame(replace(s, seed=4), 9)
    assert (a.pixels != c.pixels).any()


def test_band_out_of_frame():
    with pytest.raises(SceneOutOfFrame):
        render_frame(SynthScene(distance_mm=40.0))


def test_sequence_step_profile(tmp_path):
    s = SynthScene()
    profile = profile_from_steps([{"from_frame": 3, "d_mm": 1.9}], s)
    render_sequence(s, 5, tmp_path, profile)
    gt = load_ground_truth(tmp_path)
    assert [f["true_d_mm"] for f in gt] == [1.75, 1.75, 1.75, 1.9, 1.9]
    assert sorted(p.name for p in tmp_path.glob("frame_*.png")) == [
        f"frame_{i:04d}.png" for i in range(5)]
    doc = json.loads((tmp_path / "ground_truth.json").read_text())
    assert SynthScene.from_dict(doc["scene"]) == s


def test_scene_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        SynthScene.from_dict({"bogus": 1})
