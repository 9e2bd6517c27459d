"""Per-slice edge detection, filament masks, centerlines and strip rectification.

Row coordinates are continuous: pixel ``i`` of a slice covers ``[i, i + 1)``,
so the forward difference ``g[i] = I[i+1] - I[i]`` sits on the boundary at
``i + 1``.  An edge is located at the gradient-magnitude-weighted position of
the boundary samples around its threshold crossing, i.e. a linear
interpolation between neighbouring boundaries.  For an area-sampled step
this recovers the true edge exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousBand, MaskTooSparse, NoFilament, ShiftOutOfRange

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 40.0
SMOOTH_WINDOW = 5
MIN_COVERAGE = 0.5

# samples scanned past the first threshold crossing when looking for the edge peak
_LOOKAHEAD = 4
# half-width of the weighted-position window around the peak
_HALF_WINDOW = 2


@dataclass(frozen=True)
class EdgePair:
    top_edge: float
    bottom_edge: float

    @property
    def width_px(self) -> float:
        return self.bottom_edge - self.top_edge

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.top_edge + self.bottom_edge)


@dataclass(frozen=True)
class EdgeMask:
    """Per-column edges of one strip; absent columns hold NaN."""

    top: np.ndarray
    bottom: np.ndarray
    height: int

    @property
    def n_columns(self) -> int:
        return self.top.shape[0]

    @property
    def present(self) -> np.ndarray:
        return np.isfinite(self.top)

    @property
    def coverage(self) -> float:
        return float(self.present.mean()) if self.n_columns else 0.0

    @property
    def width_px(self) -> np.ndarray:
        return self.bottom - self.top

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.top + self.bottom)

    def edge(self, column: int) -> EdgePair | None:
        if not np.isfinite(self.top[column]):
            return None
        return EdgePair(float(self.top[column]), float(self.bottom[column]))


@dataclass(frozen=True)
class SlicedStrip:
    """A strip after segmentation and rectification.

    ``rectified`` holds float intensities; column ``c`` was resampled so the
    smoothed ``centerline[c]`` lands on row ``height / 2``.
    """

    mask: EdgeMask
    centerline: np.ndarray
    shift: np.ndarray
    rectified: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.mask.n_columns

    @property
    def height(self) -> int:
        return self.mask.height

    @property
    def width_px(self) -> np.ndarray:
        return self.mask.width_px

    @property
    def rectified_top(self) -> np.ndarray:
        return self.mask.top - self.shift

    @property
    def rectified_bottom(self) -> np.ndarray:
        return self.mask.bottom - self.shift


def gradient(strip: np.ndarray) -> np.ndarray:
    """Forward difference along rows (axis 0)."""
    return np.diff(np.asarray(strip, dtype=np.float64), axis=0)


def _refine(g, cols, idx, sign, step, threshold):
    """Sub-pixel edge positions for crossings starting at ``idx``.

    Walks up to ``_LOOKAHEAD`` samples in direction ``step`` while the
    gradient stays above threshold with the crossing's sign, takes the
    strongest sample as the peak, then returns the magnitude-weighted mean
    boundary position over ``peak +- _HALF_WINDOW`` (same-sign samples only).
    """
    n = g.shape[0]
    best = idx.copy()
    best_val = sign * g[idx, cols]
    alive = np.ones(idx.shape, dtype=bool)
    for k in range(1, _LOOKAHEAD + 1):
        j = idx + step * k
        inside = (j >= 0) & (j < n)
        jc = np.clip(j, 0, n - 1)
        v = sign * g[jc, cols]
        alive &= inside & (v >= threshold)
        better = alive & (v > best_val)
        best = np.where(better, jc, best)
        best_val = np.where(better, v, best_val)
    offs = np.arange(-_HALF_WINDOW, _HALF_WINDOW + 1)
    win = best[:, None] + offs[None, :]
    valid = (win >= 0) & (win < n)
    winc = np.clip(win, 0, n - 1)
    w = sign[:, None] * g[winc, cols[:, None]]
    w = np.where(valid, np.maximum(w, 0.0), 0.0)
    return (w * (winc + 1)).sum(axis=1) / w.sum(axis=1)


def _signed_crossings(g, threshold):
    return (np.sign(g) * (np.abs(g) >= threshold)).astype(np.int8)


def _runs(s_col):
    """Maximal runs of equal non-zero sign: list of (start, end, sign)."""
    runs = []
    start = None
    for i, v in enumerate(s_col):
        v = int(v)
        if start is not None and v != runs_sign:
            runs.append((start, i - 1, runs_sign))
            start = None
        if start is None and v != 0:
            start, runs_sign = i, v
    if start is not None:
        runs.append((start, len(s_col) - 1, runs_sign))
    return runs


def _candidates(g_col, threshold) -> list[EdgePair]:
    """All bands of one slice: an entering crossing paired with the next opposite one."""
    runs = _runs(_signed_crossings(g_col, threshold))
    if len(runs) < 2:
        return []
    s0 = runs[0][2]
    pairs = []
    i = 0
    while i < len(runs):
        if runs[i][2] != s0:
            i += 1
            continue
        j = next((k for k in range(i + 1, len(runs)) if runs[k][2] == -s0), None)
        if j is None:
            break
        pairs.append((runs[i][0], runs[j][1]))
        i = j + 1
    if not pairs:
        return []
    g2 = g_col[:, None]
    zero = np.zeros(len(pairs), dtype=np.intp)
    tops = _refine(g2, zero, np.array([p[0] for p in pairs]), np.full(len(pairs), s0), 1, threshold)
    bots = _refine(g2, zero, np.array([p[1] for p in pairs]), np.full(len(pairs), -s0), -1, threshold)
    return [EdgePair(float(t), float(b)) for t, b in zip(tops, bots)]


def _nearest(cands: list[EdgePair], center: float) -> EdgePair:
    return min(cands, key=lambda e: abs(e.midpoint - center))


def detect_edges(slice_, threshold: float = DEFAULT_THRESHOLD,
                 prev_center: float | None = None) -> EdgePair:
    """Filament edges of one single-pixel slice.

    With several candidate bands the one whose midpoint is nearest
    ``prev_center`` wins; without ``prev_center`` that is an error.
    """
    col = np.asarray(slice_, dtype=np.float64).ravel()
    if col.size < 3:
        raise ValueError("slice must have at least 3 samples")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    cands = _candidates(np.diff(col), threshold)
    if not cands:
        raise NoFilament("no opposite-sign gradient crossings above threshold")
    if len(cands) == 1:
        return cands[0]
    if prev_center is None:
        raise AmbiguousBand(f"{len(cands)} candidate bands", cands)
    return _nearest(cands, prev_center)


def build_mask(strip: np.ndarray, threshold: float = DEFAULT_THRESHOLD,
               prev_centerline: np.ndarray | None = None,
               min_coverage: float = MIN_COVERAGE) -> EdgeMask:
    """Run edge detection over every column of ``strip``.

    Columns with a single band take a vectorised path; the rest are resolved
    one at a time, ambiguous ones by proximity to the nearest already
    resolved column (left first, then right), then to ``prev_centerline``.
    """
    strip = np.asarray(strip)
    if strip.ndim != 2 or strip.size == 0:
        raise ValueError("strip must be a non-empty 2-D array")
    if strip.shape[0] < 3:
        raise ValueError("strip must have at least 3 rows")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    g = gradient(strip)
    n, m = g.shape
    s = _signed_crossings(g, threshold)
    nz = s != 0
    prev = np.vstack([np.zeros((1, m), dtype=s.dtype), s[:-1]])
    n_runs = (nz & (s != prev)).sum(axis=0)
    first = np.argmax(nz, axis=0)
    last = n - 1 - np.argmax(nz[::-1], axis=0)
    cols = np.arange(m)
    s_first = s[first, cols].astype(np.float64)
    s_last = s[last, cols].astype(np.float64)
    simple = (n_runs == 2) & (s_first == -s_last)

    top = np.full(m, np.nan)
    bottom = np.full(m, np.nan)
    sc = cols[simple]
    if sc.size:
        top[sc] = _refine(g, sc, first[sc], s_first[sc], 1, threshold)
        bottom[sc] = _refine(g, sc, last[sc], s_last[sc], -1, threshold)

    deferred = []
    for c in cols[(~simple) & (n_runs >= 2)]:
        cands = _candidates(g[:, c], threshold)
        if not cands:
            continue
        if len(cands) == 1:
            e = cands[0]
        else:
            left = np.flatnonzero(np.isfinite(top[:c]))
            if left.size == 0:
                deferred.append((c, cands))
                continue
            k = left[-1]
            e = _nearest(cands, 0.5 * (top[k] + bottom[k]))
        top[c], bottom[c] = e.top_edge, e.bottom_edge
    for c, cands in deferred:
        right = np.flatnonzero(np.isfinite(top[c + 1:]))
        if right.size:
            k = c + 1 + right[0]
            ref = 0.5 * (top[k] + bottom[k])
        elif prev_centerline is not None and np.isfinite(prev_centerline[c]):
            ref = float(prev_centerline[c])
        else:
            logger.debug("column %d: %d bands, nothing to disambiguate by", c, len(cands))
            continue
        e = _nearest(cands, ref)
        top[c], bottom[c] = e.top_edge, e.bottom_edge

    mask = EdgeMask(top, bottom, strip.shape[0])
    if mask.coverage < min_coverage:
        raise MaskTooSparse(
            f"only {mask.coverage:.0%} of columns yielded edges (need {min_coverage:.0%})"
        )
    return mask


def moving_average(values: np.ndarray, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically at the ends.

    Symmetric windows keep straight lines exactly straight, ends included.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    half = np.minimum(np.minimum(np.arange(n), n - 1 - np.arange(n)), window // 2)
    csum = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(n)
    return (csum[idx + half + 1] - csum[idx - half]) / (2 * half + 1)


def centerline(mask: EdgeMask, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Sub-pixel midline per column, gaps linearly filled, then smoothed."""
    present = mask.present
    if not present.any():
        raise MaskTooSparse("mask has no detected columns")
    cols = np.arange(mask.n_columns)
    mid = np.interp(cols, cols[present], mask.midpoints[present])
    return moving_average(mid, window)


def rectify(strip: np.ndarray, midline: np.ndarray, mask: EdgeMask | None = None) -> SlicedStrip:
    """Shift every column so ``midline`` becomes the constant row ``height / 2``.

    Linear resampling; samples beyond the strip replicate the border row.
    """
    strip = np.asarray(strip, dtype=np.float64)
    h, w = strip.shape
    midline = np.asarray(midline, dtype=np.float64)
    if midline.shape != (w,) or not np.all(np.isfinite(midline)):
        raise ValueError("midline must be finite and have one value per column")
    target = h / 2.0
    shift = midline - target
    if np.any(np.abs(shift) > target):
        raise ShiftOutOfRange(
            f"midline leaves the strip (max shift {np.abs(shift).max():.2f} px, height {h})"
        )
    if mask is not None:
        new_top = mask.top - shift
        new_bottom = mask.bottom - shift
        ok = ~mask.present | ((new_top >= -1.0) & (new_bottom <= h + 1.0))
        if not ok.all():
            raise ShiftOutOfRange("rectification pushes the band outside the strip")
    else:
        mask = EdgeMask(np.full(w, np.nan), np.full(w, np.nan), h)
    src = np.arange(h, dtype=np.float64)[:, None] + shift[None, :]
    i0 = np.floor(src)
    f = src - i0
    i0 = i0.astype(np.intp)
    lo = np.clip(i0, 0, h - 1)
    hi = np.clip(i0 + 1, 0, h - 1)
    cols = np.arange(w)[None, :]
    out = (1.0 - f) * strip[lo, cols] + f * strip[hi, cols]
    return SlicedStrip(mask=mask, centerline=midline, shift=shift, rectified=out)


def segment_strip(strip: np.ndarray, threshold: float = DEFAULT_THRESHOLD,
                  prev_centerline: np.ndarray | None = None) -> SlicedStrip:
    """build_mask, centerline and rectify in one call."""
    mask = build_mask(strip, threshold, prev_centerline)
    return rectify(strip, centerline(mask), mask)
