"""Frame loading, rig configuration and region-of-interest cropping."""

from __future__ import annotations

import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    ConfigError,
    EmptySequence,
    FileUnreadable,
    RoiOutOfBounds,
    UnsupportedFormat,
)

IMAGE_SUFFIXES = (".png", ".pgm")
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
PGM_MAGIC = b"P5"

PROJECTIONS = ("main", "upper", "lower")


@dataclass(frozen=True)
class Frame:
    """One grayscale frame.

    ``pixels`` is a row-major ``(height, width)`` uint8 array.
    """

    pixels: np.ndarray
    index: int = 0
    period_s: float = 1.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"frame must be a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if np.issubdtype(px.dtype, np.floating) and not np.all(np.isfinite(px)):
                raise ValueError("frame intensities must be finite")
            if px.min() < 0 or px.max() > 255:
                raise ValueError("frame intensities must lie in [0, 255]")
            px = np.rint(px).astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Roi:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"ROI field {name!r} must be an integer, got {v!r}")
        if self.w < 1 or self.h < 1:
            raise ConfigError(f"ROI must be at least 1x1, got {self.w}x{self.h}")

    def fits(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x + self.w <= width and self.y + self.h <= height

    def overlaps(self, other: "Roi") -> bool:
        return not (
            self.x + self.w <= other.x
            or other.x + other.w <= self.x
            or self.y + self.h <= other.y
            or other.y + other.h <= self.y
        )

    def to_dict(self) -> dict:
        return {"x": int(self.x), "y": int(self.y), "w": int(self.w), "h": int(self.h)}


_RIG_KEYS = {
    "roi_main",
    "roi_upper",
    "roi_lower",
    "gradient_threshold",
    "nominal_diameter_mm",
    "tolerance_mm",
    "feed_rate_mm_s",
    "period_s",
}


@dataclass(frozen=True)
class RigConfig:
    roi_main: Roi
    roi_upper: Roi
    roi_lower: Roi
    gradient_threshold: float = 40.0
    nominal_diameter_mm: float = 1.75
    tolerance_mm: float = 0.05
    feed_rate_mm_s: float = 10.0
    period_s: float = 1.0
    max_ovality_pct: float | None = field(default=None, compare=False)

    def __post_init__(self):
        rois = self.rois
        widths = {r.w for r in rois.values()}
        if len(widths) != 1:
            raise ConfigError(f"all three ROIs must share the same width N, got {sorted(widths)}")
        names = list(rois)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if rois[a].overlaps(rois[b]):
                    raise ConfigError(f"ROIs {a!r} and {b!r} overlap")
        if not self.gradient_threshold > 0:
            raise ConfigError("gradient_threshold must be positive")
        if not self.nominal_diameter_mm > 0:
            raise ConfigError("nominal_diameter_mm must be positive")
        if not self.tolerance_mm > 0:
            raise ConfigError("tolerance_mm must be positive")
        if not self.feed_rate_mm_s > 0 or not self.period_s > 0:
            raise ConfigError("feed_rate_mm_s and period_s must be positive")

    @property
    def rois(self) -> dict[str, Roi]:
        return {"main": self.roi_main, "upper": self.roi_upper, "lower": self.roi_lower}

    @property
    def n_columns(self) -> int:
        return self.roi_main.w

    def check_frame(self, frame: Frame) -> None:
        for name, roi in self.rois.items():
            if not roi.fits(frame.width, frame.height):
                raise RoiOutOfBounds(
                    f"ROI {name} {roi} exceeds frame {frame.width}x{frame.height}"
                )

    @classmethod
    def from_dict(cls, doc: dict) -> "RigConfig":
        if not isinstance(doc, dict):
            raise ConfigError("rig config must be a JSON object")
        keys = set(doc)
        if keys != _RIG_KEYS:
            missing = sorted(_RIG_KEYS - keys)
            extra = sorted(keys - _RIG_KEYS)
            raise ConfigError(f"rig config keys mismatch: missing={missing} unexpected={extra}")
        try:
            rois = {}
            for k in ("roi_main", "roi_upper", "roi_lower"):
                r = doc[k]
                if not isinstance(r, dict) or set(r) != {"x", "y", "w", "h"}:
                    raise ConfigError(f"{k} must be an object with keys x, y, w, h")
                rois[k] = Roi(**r)
            nums = {}
            for k in ("gradient_threshold", "nominal_diameter_mm", "tolerance_mm",
                      "feed_rate_mm_s", "period_s"):
                v = doc[k]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ConfigError(f"{k} must be a finite number, got {v!r}")
                nums[k] = float(v)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**rois, **nums)

    def to_dict(self) -> dict:
        return {
            "roi_main": self.roi_main.to_dict(),
            "roi_upper": self.roi_upper.to_dict(),
            "roi_lower": self.roi_lower.to_dict(),
            "gradient_threshold": self.gradient_threshold,
            "nominal_diameter_mm": self.nominal_diameter_mm,
            "tolerance_mm": self.tolerance_mm,
            "feed_rate_mm_s": self.feed_rate_mm_s,
            "period_s": self.period_s,
        }


def load_rig_config(path) -> RigConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read rig config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"rig config {path} is not valid JSON: {exc}") from exc
    return RigConfig.from_dict(doc)


def save_rig_config(rig: RigConfig, path) -> None:
    Path(path).write_text(json.dumps(rig.to_dict(), indent=2) + "\n")


def to_gray(rgb: np.ndarray) -> np.ndarray:
    """Unweighted channel mean of an ``(h, w, 3)`` uint8 array, rounded half-up."""
    total = rgb[..., :3].astype(np.int32).sum(axis=-1)
    # floor(total / 3 + 1/2) in integer arithmetic
    return ((2 * total + 3) // 6).astype(np.uint8)


def decode_image(data: bytes, name: str = "<bytes>") -> np.ndarray:
    """Decode PNG or binary PGM bytes into a 2-D uint8 grayscale array."""
    if not data:
        raise FileUnreadable(f"{name}: empty file")
    if not (data.startswith(PNG_MAGIC) or data.startswith(PGM_MAGIC)):
        raise UnsupportedFormat(f"{name}: not a PNG or binary PGM raster")
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            mode = im.mode
            if im.format == "PPM" and mode != "L":
                raise UnsupportedFormat(f"{name}: only 8-bit binary PGM (P5) is supported")
            if mode in ("I;16", "I;16B", "I", "F"):
                raise UnsupportedFormat(f"{name}: only 8-bit rasters are supported (mode {mode})")
            if mode == "L":
                return np.array(im, dtype=np.uint8)
            if mode in ("1", "LA"):
                return np.array(im.convert("L"), dtype=np.uint8)
            return to_gray(np.array(im.convert("RGB"), dtype=np.uint8))
    except UnidentifiedImageError as exc:
        raise FileUnreadable(f"{name}: cannot decode raster") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, UnsupportedFormat):
            raise
        raise FileUnreadable(f"{name}: corrupt raster ({exc})") from exc


def load_frame(path, index: int = 0, period_s: float = 1.0) -> Frame:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    return Frame(decode_image(data, str(path)), index=index, period_s=period_s)


def write_pgm(path, pixels: np.ndarray) -> None:
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w = px.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(px.tobytes())


def write_png(path, pixels: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8), mode="L").save(path, format="PNG")


def write_frame(path, pixels: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        write_pgm(path, pixels)
    else:
        write_png(path, pixels)


_NUM = re.compile(r"(\d+)(?!.*\d)")


def _sort_key(path: Path):
    m = _NUM.search(path.stem)
    if m is None:
        return (1, 0, path.name)
    return (0, int(m.group(1)), path.name)


def _looks_decodable(path: Path) -> bool:
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError:
        return False
    return head.startswith(PNG_MAGIC) or head.startswith(PGM_MAGIC)


def scan_sequence(directory) -> list[Path]:
    """Image files of ``directory`` ordered by their trailing frame number."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileUnreadable(f"{directory}: not a directory")
    paths = [
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES and _looks_decodable(p)
    ]
    if not paths:
        raise EmptySequence(f"{directory}: no decodable frames")
    return sorted(paths, key=_sort_key)


def extract_roi(frame: Frame | np.ndarray, roi: Roi) -> np.ndarray:
    """Copy of the ROI as an ``(h, w)`` strip; each column is one single-pixel slice."""
    px = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    height, width = px.shape
    if not roi.fits(width, height):
        raise RoiOutOfBounds(f"{roi} exceeds frame {width}x{height}")
    return px[roi.y:roi.y + roi.h, roi.x:roi.x + roi.w].copy()
