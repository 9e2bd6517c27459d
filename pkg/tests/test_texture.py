import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filagauge.errors import AbsentColumn, InsufficientBaseline, MismatchedWidths
from filagauge.measurement import measure_frame
from filagauge.segmentation import EdgeMask, rectify
from filagauge.synth import Pit, render_frame
from filagauge.texture import (
    BAND_SAMPLES,
    PseudoSurfacePatch,
    TextureBaseline,
    anomaly_score,
    assemble_patch,
    slice_profile,
    write_patch,
)


def strip_with_band(values_in_band, n_cols=8, top=10):
    """Strip whose rows ``top .. top+len-1`` hold the given column profile.

    The height puts the band centre on row ``height / 2`` so rectification
    does not resample.
    """
    values_in_band = np.asarray(values_in_band, float)
    bottom = top + values_in_band.size
    height = top + bottom
    strip = np.full((height, n_cols), 200.0)
    strip[top:bottom] = values_in_band[:, None]
    mask = EdgeMask(np.full(n_cols, float(top)), np.full(n_cols, float(bottom)), height)
    mid = np.full(n_cols, 0.5 * (top + bottom))
    return rectify(strip, mid, mask)


def test_constant_band_profile():
    s = strip_with_band(np.full(32, 90.0))
    np.testing.assert_allclose(slice_profile(s, 3), 90.0)


def test_ramp_profile_endpoints():
    s = strip_with_band(np.linspace(50, 150, 32))
    p = slice_profile(s, 0)
    assert p[0] == pytest.approx(50.0)
    assert p[-1] == pytest.approx(150.0)
    np.testing.assert_allclose(p, np.linspace(50, 150, 32))


def test_profile_resamples_to_fixed_height():
    s = strip_with_band(np.linspace(0, 100, 11))
    p = slice_profile(s, 0)
    assert p.shape == (BAND_SAMPLES,)
    np.testing.assert_allclose(p, np.linspace(0, 100, BAND_SAMPLES), atol=1e-9)


def test_absent_column():
    s = strip_with_band(np.full(32, 90.0))
    s.mask.top[2] = np.nan
    s.mask.bottom[2] = np.nan
    with pytest.raises(AbsentColumn):
        slice_profile(s, 2)


def test_assemble_uniform_bands():
    u, m, l = (strip_with_band(np.full(20, v)) for v in (40.0, 80.0, 120.0))
    p = assemble_patch(u, m, l, index=4)
    assert p.values.shape == (3 * BAND_SAMPLES, 8)
    np.testing.assert_allclose(p.band("upper"), 40.0)
    np.testing.assert_allclose(p.band("main"), 80.0)
    np.testing.assert_allclose(p.band("lower"), 120.0)


def test_assemble_mismatched_widths():
    a = strip_with_band(np.full(20, 40.0), n_cols=8)
    b = strip_with_band(np.full(20, 40.0), n_cols=9)
    with pytest.raises(MismatchedWidths):
        assemble_patch(a, a, b)


def test_pit_shows_in_upper_band_only(scene, rig, calibration):
    clean = measure_frame(render_frame(scene, 3)[0], rig, calibration).patch
    pitted_scene = replace(scene, pits=(Pit(x_mm=0.0, length_mm=1.5, angle_deg=110, depth=40),))
    pitted = measure_frame(render_frame(pitted_scene, 3)[0], rig, calibration).patch
    diff = {name: np.abs(pitted.band(name) - clean.band(name)).max()
            for name in ("upper", "main", "lower")}
    assert diff["upper"] > 10
    assert diff["main"] < 1 and diff["lower"] < 1


def trained_baseline(rows=6, cols=50, n=10, seed=0):
    rng = np.random.default_rng(seed)
    base = TextureBaseline()
    for _ in range(n):
        base.update(100 + rng.standard_normal((rows, cols)))
    return base


def count_outliers(values, mean, std):
    """Cell-by-cell oracle of the 3-sigma rule."""
    hits = 0
    for i, j in itertools.product(range(values.shape[0]), range(values.shape[1])):
        if abs(values[i, j] - mean[i]) > 3 * std[i] + 1e-9:
            hits += 1
    return hits / values.size


def test_identical_patch_scores_zero():
    base = trained_baseline()
    patch = np.repeat(base.mean[:, None], 50, axis=1)
    assert anomaly_score(patch, base) == 0.0


def test_planted_outliers_score():
    base = trained_baseline(rows=10, cols=100)
    patch = np.repeat(base.mean[:, None], 100, axis=1).copy()
    flat = np.random.default_rng(1).choice(patch.size, 50, replace=False)
    patch.flat[flat] += 10 * base.std.max()
    mean, std = base.mean.copy(), base.std.copy()
    score = anomaly_score(patch, base, update=False)
    assert score == pytest.approx(0.05)
    assert score == count_outliers(patch, mean, std)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.5, 8))
def test_score_matches_cell_oracle(seed, spread):
    base = trained_baseline(seed=seed % 1000)
    patch = 100 + spread * np.random.default_rng(seed).standard_normal((6, 50))
    assert anomaly_score(patch, base, update=False) == count_outliers(patch, base.mean, base.std)


def test_insufficient_baseline():
    base = trained_baseline(n=9)
    with pytest.raises(InsufficientBaseline):
        anomaly_score(np.zeros((6, 50)), base)


def test_score_updates_baseline():
    base = trained_baseline()
    anomaly_score(np.full((6, 50), 100.0), base)
    assert base.count == 11
    anomaly_score(np.full((6, 50), 100.0), base, update=False)
    assert base.count == 11


def test_baseline_ema_oracle():
    base = TextureBaseline(decay=0.5, min_patches=1)
    base.update(np.array([[0.0, 2.0]]))
    base.update(np.array([[4.0, 4.0]]))
    # mean: 0.5*1 + 0.5*4; var: 0.5*1 + 0.5*mean((4-1)^2)
    assert base.mean.tolist() == [2.5]
    assert base.var.tolist() == [5.0]


def test_column_permutation_covariance():
    base = trained_baseline()
    rng = np.random.default_rng(5)
    patch = 100 + 3 * rng.standard_normal((6, 50))
    perm = rng.permutation(50)
    a = anomaly_score(patch, base, update=False)
    b = anomaly_score(patch[:, perm], base, update=False)
    assert a == b


def test_score_monotone_in_deviation():
    base = trained_baseline()
    rng = np.random.default_rng(6)
    noise = rng.standard_normal((6, 50))
    scores = [anomaly_score(100 + k * noise, base, update=False) for k in (0.5, 1, 2, 4, 8)]
    assert scores == sorted(scores)


def test_write_patch(tmp_path):
    p = PseudoSurfacePatch(np.full((96, 5), 12.4), index=7)
    path = write_patch(p, tmp_path)
    assert path.name == "patch_7.pgm"
    assert path.read_bytes().startswith(b"P5")
