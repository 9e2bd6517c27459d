"""Pixel-to-millimetre calibration.

The calibration is a straight line in (x, y, z) space, where ``x`` is the
pixel separation between the main filament centerline and its upper mirror
image, ``y`` the camera-to-filament distance in mm and ``z`` the scale
factor in mm per pixel::

    (x - x1) / a = (y - y1) / b = (z - z1) / c

The true relation is inversely proportional in distance; the line is a local
linearisation, so every model remembers the separation range it was fitted
on and flags lookups outside it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSamples,
    EmptyCenterline,
    NonPositiveDistance,
    NonPositiveScale,
    TooFewSamples,
)


@dataclass(frozen=True)
class PinholeModel:
    focal_mm: float = 2.8
    px_per_mm_sensor: float = 350.0

    def __post_init__(self):
        if not self.focal_mm > 0 or not self.px_per_mm_sensor > 0:
            raise ValueError("focal length and sensor resolution must be positive")

    def project_px(self, size_mm: float, distance_mm: float) -> float:
        """Image size in pixels of an object ``size_mm`` wide at ``distance_mm``."""
        return project(size_mm, self.focal_mm, distance_mm) * self.px_per_mm_sensor


def project(W: float, F: float, L: float) -> float:
    """Pinhole projection size on the sensor, ``F * W / L`` (all mm).

    Evaluated as ``W * (F / L)`` so that ``L == F`` returns ``W`` exactly.
    """
    if not L > 0:
        raise NonPositiveDistance(f"distance must be positive, got {L}")
    if not F > 0:
        raise ValueError(f"focal length must be positive, got {F}")
    if W < 0:
        raise ValueError(f"object size must be non-negative, got {W}")
    return W * (F / L)


def px_to_mm(d_px, s):
    """Diameter in mm from a width in pixels and a scale factor in mm/px."""
    if np.any(np.asarray(s) <= 0):
        raise NonPositiveScale(f"scale factor must be positive, got {s}")
    if np.any(np.asarray(d_px) < 0):
        raise ValueError("pixel width must be non-negative")
    return d_px * s


def separation(main_centerline, mirror_centerline,
               main_offset: float = 0.0, mirror_offset: float = 0.0) -> float:
    """Distance in pixels between the mean rows of two centerlines.

    Offsets translate ROI-local rows into frame rows.
    """
    main = np.asarray(main_centerline, dtype=np.float64)
    mirror = np.asarray(mirror_centerline, dtype=np.float64)
    if main.size == 0 or mirror.size == 0:
        raise EmptyCenterline("both centerlines must be non-empty")
    return float(abs((main.mean() + main_offset) - (mirror.mean() + mirror_offset)))


class Scale(NamedTuple):
    mm_per_px: float
    distance_mm: float | None
    extrapolated: bool


@dataclass(frozen=True)
class CalibrationModel:
    x1: float
    y1: float | None
    z1: float
    a: float
    b: float
    c: float
    valid_x_range: tuple[float, float]
    residual_rms: float = 0.0

    def __post_init__(self):
        if self.a == 0 or not math.isfinite(self.a):
            raise ConfigError("direction coefficient a must be finite and non-zero")
        lo, hi = self.valid_x_range
        if not lo <= hi:
            raise ConfigError(f"empty valid_x_range {self.valid_x_range}")

    def to_dict(self) -> dict:
        return {
            "x1": self.x1, "y1": self.y1, "z1": self.z1,
            "a": self.a, "b": self.b, "c": self.c,
            "valid_x_range": [self.valid_x_range[0], self.valid_x_range[1]],
            "residual_rms": self.residual_rms,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationModel":
        keys = {"x1", "y1", "z1", "a", "b", "c", "valid_x_range", "residual_rms"}
        if not isinstance(doc, dict) or set(doc) != keys:
            raise ConfigError(f"calibration block must have keys {sorted(keys)}")
        try:
            rng = doc["valid_x_range"]
            if len(rng) != 2:
                raise ConfigError("valid_x_range must have two entries")
            y1 = doc["y1"]
            return cls(
                x1=float(doc["x1"]), y1=None if y1 is None else float(y1), z1=float(doc["z1"]),
                a=float(doc["a"]), b=float(doc["b"]), c=float(doc["c"]),
                valid_x_range=(float(rng[0]), float(rng[1])),
                residual_rms=float(doc["residual_rms"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad calibration block: {exc}") from exc


def fit_calibration(samples: Sequence[tuple[float, float | None, float]]) -> CalibrationModel:
    """Least-squares line through ``(x px, y mm, z mm/px)`` samples.

    The line is anchored at the sample centroid and regressed on ``x``, which
    is the only coordinate observed at measurement time.  ``y`` may be None
    for samples of unknown distance; it is then fitted from the rest (or left
    unknown).  ``residual_rms`` is the RMS scale-factor residual in mm/px.
    """
    if len(samples) < 2:
        raise TooFewSamples(f"need at least 2 calibration samples, got {len(samples)}")
    x = np.array([s[0] for s in samples], dtype=np.float64)
    y = np.array([np.nan if s[1] is None else s[1] for s in samples], dtype=np.float64)
    z = np.array([s[2] for s in samples], dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise DegenerateSamples("calibration samples must be finite")
    if np.ptp(x) == 0:
        raise DegenerateSamples("all calibration samples share the same separation x")
    x1 = x.mean()
    dx = x - x1
    slope_z = (dx * (z - z.mean())).sum() / (dx * dx).sum()
    z1 = z.mean()

    known = np.isfinite(y)
    if known.all():
        y1 = float(y.mean())
        slope_y = (dx * (y - y1)).sum() / (dx * dx).sum()
    elif known.sum() >= 2 and np.ptp(x[known]) > 0:
        xk, yk = x[known], y[known]
        slope_y = ((xk - xk.mean()) * (yk - yk.mean())).sum() / ((xk - xk.mean()) ** 2).sum()
        y1 = float(yk.mean() + slope_y * (x1 - xk.mean()))
    elif known.any():
        slope_y, y1 = 0.0, float(y[known].mean())
    else:
        slope_y, y1 = 0.0, None

    direction = np.array([1.0, slope_y, slope_z])
    direction /= np.linalg.norm(direction)
    resid = z - (z1 + slope_z * dx)
    return CalibrationModel(
        x1=float(x1), y1=y1, z1=float(z1),
        a=float(direction[0]), b=float(direction[1]), c=float(direction[2]),
        valid_x_range=(float(x.min()), float(x.max())),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
    )


def scale_for(model: CalibrationModel, x: float) -> Scale:
    """Scale factor (mm/px) and distance (mm) at separation ``x``."""
    t = (x - model.x1) / model.a
    z = model.z1 + model.c * t
    y = None if model.y1 is None else model.y1 + model.b * t
    lo, hi = model.valid_x_range
    return Scale(float(z), y if y is None else float(y), not (lo <= x <= hi))


def save_calibration(models: dict[str, CalibrationModel], path) -> None:
    doc = {name: m.to_dict() for name, m in models.items()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_calibration(path) -> dict[str, CalibrationModel]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read calibration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"calibration {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("calibration file must be a JSON object")
    missing = {"main", "upper", "lower"} - set(doc)
    if missing:
        raise ConfigError(f"calibration lacks projections {sorted(missing)}")
    return {name: CalibrationModel.from_dict(doc[name]) for name in ("main", "upper", "lower")}
