"""Reflected-light pseudo-surface patches and a statistical anomaly score.

Each rectified band is resampled to a fixed height so patches from filaments
of different diameter line up.  The score is a plain 3-sigma cell count
against exponentially weighted per-row statistics; it is a generic stand-in,
not a material-specific texture model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import write_pgm
from .errors import AbsentColumn, InsufficientBaseline, MismatchedWidths
from .segmentation import SlicedStrip

BAND_SAMPLES = 32
BASELINE_DECAY = 0.95
BASELINE_MIN_PATCHES = 10
SIGMA_LIMIT = 3.0


@dataclass(frozen=True)
class PseudoSurfacePatch:
    values: np.ndarray  # (3 * band_samples, N): upper, main, lower stacked
    index: int = 0
    band_samples: int = BAND_SAMPLES

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def band(self, name: str) -> np.ndarray:
        k = ("upper", "main", "lower").index(name)
        return self.values[k * self.band_samples:(k + 1) * self.band_samples]


def _sample_columns(rect: np.ndarray, top: np.ndarray, bottom: np.ndarray,
                    cols: np.ndarray, samples: int) -> np.ndarray:
    h = rect.shape[0]
    # first and last pixel centres inside the band, in index coordinates
    start = top
    stop = np.maximum(bottom - 1.0, top)
    t = np.linspace(0.0, 1.0, samples)
    pos = start[None, :] + t[:, None] * (stop - start)[None, :]
    pos = np.clip(pos, 0.0, h - 1.0)
    i0 = np.floor(pos).astype(np.intp)
    f = pos - i0
    i1 = np.minimum(i0 + 1, h - 1)
    c = cols[None, :]
    return (1.0 - f) * rect[i0, c] + f * rect[i1, c]


def slice_profile(sliced: SlicedStrip, column: int, samples: int = BAND_SAMPLES) -> np.ndarray:
    """Rectified intensities across the band of one column, resampled to ``samples``."""
    top = sliced.rectified_top[column]
    if not np.isfinite(top):
        raise AbsentColumn(f"column {column} has no detected band")
    bottom = sliced.rectified_bottom[column]
    return _sample_columns(sliced.rectified, np.array([top]), np.array([bottom]),
                           np.array([column]), samples)[:, 0]


def band_profiles(sliced: SlicedStrip, samples: int = BAND_SAMPLES) -> np.ndarray:
    """``slice_profile`` for every column; absent columns are NaN."""
    present = np.isfinite(sliced.rectified_top)
    out = np.full((samples, sliced.n_columns), np.nan)
    cols = np.flatnonzero(present)
    if cols.size:
        out[:, cols] = _sample_columns(sliced.rectified, sliced.rectified_top[cols],
                                       sliced.rectified_bottom[cols], cols, samples)
    return out


def _fill_columns(block: np.ndarray) -> np.ndarray:
    present = np.isfinite(block[0])
    if present.all():
        return block
    if not present.any():
        raise AbsentColumn("strip has no detected columns")
    cols = np.arange(block.shape[1])
    return np.stack([np.interp(cols, cols[present], row[present]) for row in block])


def assemble_patch(upper: SlicedStrip, main: SlicedStrip, lower: SlicedStrip,
                   index: int = 0, samples: int = BAND_SAMPLES) -> PseudoSurfacePatch:
    widths = {upper.n_columns, main.n_columns, lower.n_columns}
    if len(widths) != 1:
        raise MismatchedWidths(f"strips have different column counts {sorted(widths)}")
    blocks = [_fill_columns(band_profiles(s, samples)) for s in (upper, main, lower)]
    values = np.clip(np.vstack(blocks), 0.0, 255.0)
    return PseudoSurfacePatch(values, index=index, band_samples=samples)


@dataclass
class TextureBaseline:
    """Exponentially weighted per-row mean and variance of past patches."""

    decay: float = BASELINE_DECAY
    min_patches: int = BASELINE_MIN_PATCHES
    count: int = 0
    mean: np.ndarray | None = field(default=None, repr=False)
    var: np.ndarray | None = field(default=None, repr=False)

    @property
    def ready(self) -> bool:
        return self.count >= self.min_patches

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    def update(self, patch: PseudoSurfacePatch | np.ndarray) -> None:
        v = patch.values if isinstance(patch, PseudoSurfacePatch) else np.asarray(patch, float)
        row_mean = v.mean(axis=1)
        if self.mean is None:
            self.mean = row_mean
            self.var = v.var(axis=1)
        else:
            if v.shape[0] != self.mean.shape[0]:
                raise MismatchedWidths("patch row count differs from the baseline")
            sq = ((v - self.mean[:, None]) ** 2).mean(axis=1)
            self.mean = self.decay * self.mean + (1 - self.decay) * row_mean
            self.var = self.decay * self.var + (1 - self.decay) * sq
        self.count += 1


def anomaly_score(patch: PseudoSurfacePatch | np.ndarray, baseline: TextureBaseline,
                  update: bool = True) -> float:
    """Fraction of cells more than 3 baseline sigmas from their row mean.

    The baseline absorbs the patch afterwards unless ``update`` is False.
    """
    if not baseline.ready:
        raise InsufficientBaseline(
            f"baseline has {baseline.count} patches, needs {baseline.min_patches}"
        )
    v = patch.values if isinstance(patch, PseudoSurfacePatch) else np.asarray(patch, float)
    if v.shape[0] != baseline.mean.shape[0]:
        raise MismatchedWidths("patch row count differs from the baseline")
    dev = np.abs(v - baseline.mean[:, None])
    limit = SIGMA_LIMIT * baseline.std[:, None]
    # tolerance keeps exact matches against zero-variance rows from counting
    score = float(np.mean(dev > limit + 1e-9))
    if update:
        baseline.update(v)
    return score


def write_patch(patch: PseudoSurfacePatch, directory) -> Path:
    path = Path(directory) / f"patch_{patch.index}.pgm"
    write_pgm(path, np.rint(patch.values).astype(np.uint8))
    return path
