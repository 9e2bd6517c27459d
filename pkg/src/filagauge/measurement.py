"""Calibrated diameters, ovality, tolerance flags and the along-length log."""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .acquisition import PROJECTIONS, Frame, RigConfig, extract_roi, load_frame
from .calibration import CalibrationModel, fit_calibration, scale_for, separation
from .errors import FilagaugeError, InvalidOrder, MaskTooSparse, NonMonotonicIndex
from .segmentation import SlicedStrip, segment_strip
from .texture import PseudoSurfacePatch, TextureBaseline, anomaly_score, assemble_patch

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("frame", "length_mm", "d_main_mm", "d_upper_mm", "d_lower_mm",
               "d_mean_mm", "ovality_pct", "flags", "anomaly_score")


class Flag(str, enum.Enum):
    OVER_TOLERANCE = "OverTolerance"
    UNDER_TOLERANCE = "UnderTolerance"
    OVALITY_EXCEEDED = "OvalityExceeded"
    SPARSE_DATA = "SparseData"


def format_flags(flags) -> str:
    return "|".join(f.value for f in Flag if f in flags)


def ovality(d_max: float, d_min: float, d_nominal: float) -> float:
    """Cross-section ovality in percent of the nominal diameter."""
    if d_max < d_min:
        raise InvalidOrder(f"d_max {d_max} < d_min {d_min}")
    if not d_min > 0 or not d_nominal > 0:
        raise ValueError("diameters must be positive")
    return (d_max - d_min) / d_nominal * 100.0


def default_max_ovality(nominal_mm: float, tolerance_mm: float) -> float:
    """Largest ovality a filament inside the +-tolerance band can show, percent."""
    return 2.0 * tolerance_mm / nominal_mm * 100.0


@dataclass(frozen=True)
class SliceMeasurement:
    column: int
    d_main_mm: float | None
    d_upper_mm: float | None
    d_lower_mm: float | None
    ovality_pct: float | None


def _opt(v) -> float | None:
    return float(v) if np.isfinite(v) else None


def _nanmean(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    a = a[np.isfinite(a)]
    return float(a.mean()) if a.size else math.nan


@dataclass
class FrameMeasurement:
    index: int
    d_mm: dict[str, np.ndarray]
    ovality_pct: np.ndarray
    flags: frozenset = frozenset()
    separation_px: float = math.nan
    extrapolated: bool = False
    centers_px: dict[str, float] = field(default_factory=dict)
    patch: PseudoSurfacePatch | None = None
    anomaly_score: float | None = None

    @property
    def n_columns(self) -> int:
        return self.ovality_pct.shape[0]

    def projection_mean(self, name: str) -> float:
        return _nanmean(self.d_mm[name])

    @property
    def pooled_mean(self) -> float:
        return _nanmean(np.concatenate([self.d_mm[p] for p in PROJECTIONS]))

    @property
    def mean_ovality(self) -> float:
        return _nanmean(self.ovality_pct)

    @property
    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for p in PROJECTIONS:
            v = self.d_mm[p][np.isfinite(self.d_mm[p])]
            if v.size:
                out[p] = {"mean": float(v.mean()), "min": float(v.min()), "max": float(v.max())}
            else:
                out[p] = {"mean": math.nan, "min": math.nan, "max": math.nan}
        return out

    def slices(self) -> list[SliceMeasurement]:
        return [
            SliceMeasurement(c, _opt(self.d_mm["main"][c]), _opt(self.d_mm["upper"][c]),
                             _opt(self.d_mm["lower"][c]), _opt(self.ovality_pct[c]))
            for c in range(self.n_columns)
        ]


@dataclass
class PixelMeasurement:
    """Uncalibrated per-projection segmentation of one frame."""

    strips: dict[str, SlicedStrip | None]
    centers_px: dict[str, float]
    separation_px: float | None

    @property
    def sparse(self) -> bool:
        return any(s is None for s in self.strips.values())

    def width_px(self, name: str) -> np.ndarray | None:
        s = self.strips[name]
        return None if s is None else s.width_px


def measure_pixels(frame: Frame, rig: RigConfig,
                   prev_centerlines: dict[str, np.ndarray] | None = None) -> PixelMeasurement:
    rig.check_frame(frame)
    strips, centers = {}, {}
    for name, roi in rig.rois.items():
        prev = None if prev_centerlines is None else prev_centerlines.get(name)
        try:
            s = segment_strip(extract_roi(frame, roi), rig.gradient_threshold, prev)
        except MaskTooSparse as exc:
            logger.info("frame %d, %s projection: %s", frame.index, name, exc)
            s = None
        strips[name] = s
        if s is not None:
            centers[name] = float(s.centerline.mean() + roi.y)
    sep = None
    if strips["main"] is not None and strips["upper"] is not None:
        sep = separation(strips["main"].centerline, strips["upper"].centerline,
                         rig.roi_main.y, rig.roi_upper.y)
    return PixelMeasurement(strips, centers, sep)


def flag_tolerance(fm: FrameMeasurement, nominal: float, tol: float,
                   max_ovality_pct: float | None = None) -> frozenset:
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if max_ovality_pct is None:
        max_ovality_pct = default_max_ovality(nominal, tol)
    flags = set()
    for p in PROJECTIONS:
        m = fm.projection_mean(p)
        if not np.isfinite(m):
            continue
        if m > nominal + tol:
            flags.add(Flag.OVER_TOLERANCE)
        if m < nominal - tol:
            flags.add(Flag.UNDER_TOLERANCE)
    ov = fm.mean_ovality
    if np.isfinite(ov) and ov > max_ovality_pct:
        flags.add(Flag.OVALITY_EXCEEDED)
    return frozenset(flags)


def _empty(index: int, n: int) -> FrameMeasurement:
    nan = np.full(n, np.nan)
    return FrameMeasurement(index, {p: nan.copy() for p in PROJECTIONS}, nan.copy(),
                            frozenset({Flag.SPARSE_DATA}))


def measure_frame(frame: Frame, rig: RigConfig, calib: dict[str, CalibrationModel],
                  with_patch: bool = True) -> FrameMeasurement:
    """Diameters of all 3 x N slices of one frame, with ovality and flags.

    A projection without enough detected columns marks the frame SparseData
    instead of raising; without the main or upper projection no scale factor
    exists, so the frame carries no diameters at all.
    """
    pm = measure_pixels(frame, rig)
    n = rig.n_columns
    if pm.separation_px is None:
        fm = _empty(frame.index, n)
        fm.centers_px = pm.centers_px
        return fm

    x = pm.separation_px
    d_mm, extrapolated = {}, False
    for p in PROJECTIONS:
        s = pm.strips[p]
        if s is None:
            d_mm[p] = np.full(n, np.nan)
            continue
        sc = scale_for(calib[p], x)
        extrapolated |= sc.extrapolated
        d_mm[p] = s.width_px * sc.mm_per_px

    stack = np.vstack([d_mm[p] for p in PROJECTIONS])
    full = np.all(np.isfinite(stack), axis=0)
    ov = np.full(n, np.nan)
    if full.any():
        ov[full] = (stack[:, full].max(axis=0) - stack[:, full].min(axis=0)) \
            / rig.nominal_diameter_mm * 100.0

    patch = None
    if with_patch and not pm.sparse:
        patch = assemble_patch(pm.strips["upper"], pm.strips["main"], pm.strips["lower"],
                               index=frame.index)
    fm = FrameMeasurement(frame.index, d_mm, ov, separation_px=x, extrapolated=extrapolated,
                          centers_px=pm.centers_px, patch=patch)
    flags = flag_tolerance(fm, rig.nominal_diameter_mm, rig.tolerance_mm, rig.max_ovality_pct)
    if pm.sparse:
        flags = flags | {Flag.SPARSE_DATA}
    fm.flags = frozenset(flags)
    return fm


@dataclass(frozen=True)
class DefectInterval:
    start_mm: float
    end_mm: float
    reason: str

    def to_dict(self) -> dict:
        return {"start_mm": self.start_mm, "end_mm": self.end_mm, "reason": self.reason}


@dataclass
class MeasurementLog:
    feed_rate_mm_s: float
    period_s: float
    frames: list[FrameMeasurement] = field(default_factory=list)
    lengths_mm: list[float] = field(default_factory=list)
    defects: list[DefectInterval] = field(default_factory=list)
    _open: dict = field(default_factory=dict, repr=False)

    def length_of(self, index: int) -> float:
        return index * self.feed_rate_mm_s * self.period_s


def append_log(log: MeasurementLog, fm: FrameMeasurement) -> MeasurementLog:
    """Append a frame; consecutive frames sharing a flag extend one defect interval."""
    if log.frames and fm.index != log.frames[-1].index + 1:
        raise NonMonotonicIndex(
            f"frame {fm.index} does not follow frame {log.frames[-1].index}"
        )
    length = log.length_of(fm.index)
    log.frames.append(fm)
    log.lengths_mm.append(length)
    still_open = {}
    for flag in Flag:
        if flag not in fm.flags:
            continue
        k = log._open.get(flag)
        if k is None:
            log.defects.append(DefectInterval(length, length, flag.value))
            k = len(log.defects) - 1
        else:
            d = log.defects[k]
            log.defects[k] = DefectInterval(d.start_mm, length, d.reason)
        still_open[flag] = k
    log._open = still_open
    return log


def _fmt(v, digits=6) -> str:
    if v is None or not np.isfinite(v):
        return ""
    return f"{v:.{digits}f}"


def log_rows(log: MeasurementLog) -> list[dict[str, str]]:
    rows = []
    for fm, length in zip(log.frames, log.lengths_mm):
        rows.append({
            "frame": str(fm.index),
            "length_mm": _fmt(length, 3),
            "d_main_mm": _fmt(fm.projection_mean("main")),
            "d_upper_mm": _fmt(fm.projection_mean("upper")),
            "d_lower_mm": _fmt(fm.projection_mean("lower")),
            "d_mean_mm": _fmt(fm.pooled_mean),
            "ovality_pct": _fmt(fm.mean_ovality, 4),
            "flags": format_flags(fm.flags),
            "anomaly_score": _fmt(fm.anomaly_score, 5),
        })
    return rows


def write_log_csv(log: MeasurementLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(log_rows(log))


def read_log_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"{path}: not a measurement log (header {reader.fieldnames})")
        return list(reader)


def write_defects_json(log: MeasurementLog, path) -> None:
    Path(path).write_text(json.dumps([d.to_dict() for d in log.defects], indent=2) + "\n")


def score_texture(fms: Iterable[FrameMeasurement], baseline: TextureBaseline | None = None) -> None:
    """Score patches in frame order; early frames only feed the baseline."""
    baseline = TextureBaseline() if baseline is None else baseline
    for fm in fms:
        if fm.patch is None:
            continue
        if baseline.ready:
            fm.anomaly_score = anomaly_score(fm.patch, baseline)
        else:
            baseline.update(fm.patch)


def _measure_path(rig, calib, with_patch, item):
    index, path = item
    try:
        frame = load_frame(path, index=index, period_s=rig.period_s)
    except FilagaugeError as exc:
        logger.warning("frame %d (%s) unreadable: %s", index, path, exc)
        return _empty(index, rig.n_columns)
    return measure_frame(frame, rig, calib, with_patch)


def measure_paths(paths: Sequence, rig: RigConfig, calib: dict[str, CalibrationModel],
                  workers: int = 1, with_patch: bool = True) -> MeasurementLog:
    """Measure an ordered frame sequence into a log.

    Frames are processed in parallel when ``workers > 1``; results are
    consumed in frame order, so texture scoring and the log stay sequential.
    """
    items = list(enumerate(paths))
    job = partial(_measure_path, rig, calib, with_patch)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fms = list(pool.map(job, items, chunksize=4))
    else:
        fms = [job(it) for it in items]
    return build_log(fms, rig)


def build_log(fms: Sequence[FrameMeasurement], rig: RigConfig) -> MeasurementLog:
    score_texture(fms)
    log = MeasurementLog(rig.feed_rate_mm_s, rig.period_s)
    for fm in fms:
        append_log(log, fm)
    return log


def calibration_sample(frames: Iterable[Frame], rig: RigConfig, diameter_mm: float,
                       distance_mm: float | None = None) -> dict[str, tuple]:
    """Average widths and separation over frames of a known-diameter filament.

    Returns one ``(x px, y mm, z mm/px)`` sample per projection.
    """
    widths = {p: [] for p in PROJECTIONS}
    seps = []
    for frame in frames:
        pm = measure_pixels(frame, rig)
        if pm.sparse:
            logger.warning("calibration frame %d skipped: sparse segmentation", frame.index)
            continue
        seps.append(pm.separation_px)
        for p in PROJECTIONS:
            widths[p].append(_nanmean(pm.width_px(p)))
    if not seps:
        raise MaskTooSparse("no usable calibration frames")
    x = float(np.mean(seps))
    return {p: (x, distance_mm, diameter_mm / float(np.mean(widths[p]))) for p in PROJECTIONS}


def calibrate_rig(sample_sets: Sequence[tuple[Iterable[Frame], float, float | None]],
                  rig: RigConfig) -> dict[str, CalibrationModel]:
    """Fit one calibration line per projection from known-diameter frame sets."""
    samples = [calibration_sample(frames, rig, d, y) for frames, d, y in sample_sets]
    return {p: fit_calibration([s[p] for s in samples]) for p in PROJECTIONS}
