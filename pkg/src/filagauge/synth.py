"""Deterministic synthetic frames of a filament seen directly and in two mirrors.

Geometry (mm, camera centre O at the origin, optical axis +z, y up, filament
along x at height 0 and distance L):

* main view: the filament itself at depth ``L``; its image width is the
  vertical (y) extent of the cross-section.
* mirrors: planes at 45 degrees, ``y + z = c_u`` above and ``z - y = c_l``
  below the filament, with ``c = mount_distance + offset``.  The virtual
  image of the filament in the upper mirror sits at depth ``c_u`` and height
  ``c_u - L``; the camera sees the depth (z) extent of the cross-section.

So the mirror bands are imaged over the longer path ``L + offset`` and their
separation from the main band shrinks linearly as the filament moves away,
which is what makes the separation usable as a distance proxy.

Each band is area-sampled: a pixel's value mixes background and filament by
the exact fraction of the pixel the band covers.  Surface brightness falls
off toward the band edges (Lambertian-like), carries a weak seeded texture
and optional dark pits, and clipped Gaussian noise is added last.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .acquisition import Frame, RigConfig, Roi, write_frame
from .calibration import PinholeModel
from .errors import ConfigError, IoFailure, SceneOutOfFrame


@dataclass(frozen=True)
class Pit:
    """Dark surface defect.  ``angle_deg``: 0 faces the camera, 90 up, 180 away, 270 down."""

    x_mm: float = 0.0
    length_mm: float = 1.0
    angle_deg: float = 135.0
    width_deg: float = 20.0
    depth: float = 25.0
    frame: int | None = None


@dataclass(frozen=True)
class SynthScene:
    pinhole: PinholeModel = field(default_factory=PinholeModel)
    width: int = 640
    height: int = 480
    # image of the camera centre's optical axis (principal point), px; None = frame centre
    principal_point: tuple[float, float] | None = None
    distance_mm: float = 50.0
    mount_distance_mm: float = 50.0
    mirror_offsets_mm: tuple[float, float] = (10.0, 10.0)
    major_mm: float = 1.75
    minor_mm: float = 1.75
    orientation_rad: float = 0.0
    nominal_mm: float = 1.75
    background: float = 200.0
    albedo: float = 100.0
    shading: float = 0.4
    texture_amp: float = 0.03
    noise_sigma: float = 0.0
    wobble_px: float = 0.0
    wobble_period_px: float = 400.0
    distance_jitter_mm: float = 0.0
    pits: tuple[Pit, ...] = ()
    filament: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.major_mm <= 0 or self.minor_mm <= 0:
            raise ConfigError("filament axes must be positive")
        if self.distance_mm - self.distance_jitter_mm <= self.pinhole.focal_mm:
            raise ConfigError("camera distance must exceed the focal length")
        if self.width < 1 or self.height < 1:
            raise ConfigError("frame size must be positive")
        if any(o <= 0 for o in self.mirror_offsets_mm):
            raise ConfigError("mirror offsets must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")

    @property
    def center(self) -> tuple[float, float]:
        if self.principal_point is None:
            return self.width / 2.0, self.height / 2.0
        return self.principal_point

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mirror_offsets_mm"] = list(self.mirror_offsets_mm)
        if self.principal_point is not None:
            d["principal_point"] = list(self.principal_point)
        d["pits"] = [asdict(p) for p in self.pits]
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthScene":
        doc = dict(doc)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown scene keys {sorted(extra)}")
        try:
            if "pinhole" in doc:
                doc["pinhole"] = PinholeModel(**doc["pinhole"])
            if "mirror_offsets_mm" in doc:
                doc["mirror_offsets_mm"] = tuple(doc["mirror_offsets_mm"])
            if doc.get("principal_point") is not None:
                doc["principal_point"] = tuple(doc["principal_point"])
            if "pits" in doc:
                doc["pits"] = tuple(Pit(**p) for p in doc["pits"])
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad scene: {exc}") from exc


@dataclass(frozen=True)
class View:
    name: str
    depth_mm: float
    height_mm: float
    extent_mm: float
    angle_deg: float  # surface angle facing this view
    flip: float  # +1 / -1: direction in which surface angle grows with image row


@dataclass(frozen=True)
class GroundTruth:
    index: int
    true_d_mm: float
    true_ovality_pct: float
    widths_px: dict[str, float]
    centers_px: dict[str, float]
    separation_px: float
    distance_mm: float
    mm_per_px: dict[str, float]
    major_mm: float
    minor_mm: float

    def to_dict(self) -> dict:
        return asdict(self)


def ellipse_extents(major: float, minor: float, orientation: float) -> tuple[float, float]:
    """Full extents along y (main view) and z (mirror views) of a tilted ellipse.

    ``orientation`` is the angle of the major axis from the y axis.
    """
    a, b = major / 2.0, minor / 2.0
    c, s = math.cos(orientation), math.sin(orientation)
    ext_y = 2.0 * math.hypot(a * c, b * s)
    ext_z = 2.0 * math.hypot(a * s, b * c)
    return ext_y, ext_z


def views(scene: SynthScene, distance: float, major: float, minor: float) -> list[View]:
    ext_y, ext_z = ellipse_extents(major, minor, scene.orientation_rad)
    c_u = scene.mount_distance_mm + scene.mirror_offsets_mm[0]
    c_l = scene.mount_distance_mm + scene.mirror_offsets_mm[1]
    return [
        View("main", distance, 0.0, ext_y, 0.0, -1.0),
        View("upper", c_u, c_u - distance, ext_z, 90.0, 1.0),
        View("lower", c_l, -(c_l - distance), ext_z, 270.0, 1.0),
    ]


def band_geometry(scene: SynthScene, view: View) -> tuple[float, float]:
    """Band centre row and half-width in pixels for one view."""
    fpx = scene.pinhole.focal_mm * scene.pinhole.px_per_mm_sensor
    center = scene.center[1] - fpx * view.height_mm / view.depth_mm
    half = fpx * view.extent_mm / (2.0 * view.depth_mm)
    return center, half


def area_coverage(n_rows: int, top, bottom) -> np.ndarray:
    """Fraction of each pixel row ``[i, i+1)`` covered by ``[top, bottom]``.

    ``top``/``bottom`` broadcast against the row axis (axis 0).
    """
    i = np.arange(n_rows, dtype=np.float64).reshape((-1,) + (1,) * np.ndim(top))
    return np.clip(np.minimum(i + 1.0, bottom) - np.maximum(i, top), 0.0, 1.0)


def render_band(n_rows: int, top: float, bottom: float, background: float = 200.0,
                foreground: float = 60.0, shading: float = 0.0) -> np.ndarray:
    """One anti-aliased slice (float intensities) with a band over ``[top, bottom]``.

    With ``shading`` the band brightens toward its middle: the value at the
    edges is ``foreground * (1 - shading)`` relative to a middle value of
    ``foreground``.
    """
    rows = np.arange(n_rows, dtype=np.float64)
    cov = area_coverage(n_rows, top, bottom)
    mid = 0.5 * (np.clip(rows, top, bottom) + np.clip(rows + 1.0, top, bottom))
    half = 0.5 * (bottom - top)
    t = np.clip((mid - 0.5 * (top + bottom)) / half, -1.0, 1.0)
    fg = foreground * (1.0 - shading + shading * np.sqrt(1.0 - t * t))
    return background * (1.0 - cov) + cov * fg


def _texture(rng: np.random.Generator, amp: float) -> Callable:
    if amp == 0:
        return lambda x, psi: 0.0
    wl = rng.uniform(0.5, 4.0, size=3)
    ph = rng.uniform(0, 2 * np.pi, size=(3, 2))
    k = np.array([1.0, 2.0, 3.0])

    def tex(x, psi):
        acc = 0.0
        for j in range(3):
            acc = acc + np.sin(2 * np.pi * x / wl[j] + ph[j, 0]) * np.cos(k[j] * psi + ph[j, 1])
        return amp * acc / math.sqrt(3.0)

    return tex


def _diameters(scene: SynthScene, diameter) -> tuple[float, float]:
    if diameter is None:
        return scene.major_mm, scene.minor_mm
    if isinstance(diameter, (tuple, list)):
        major, minor = float(diameter[0]), float(diameter[1])
    else:
        major = minor = float(diameter)
    if major <= 0 or minor <= 0:
        raise ConfigError("filament axes must be positive")
    return major, minor


def render_frame(scene: SynthScene, index: int = 0, diameter=None) -> tuple[Frame, GroundTruth]:
    """Render frame ``index``.  ``diameter`` overrides the scene's axes for this frame
    (a float for a circular section, or ``(major, minor)``)."""
    major, minor = _diameters(scene, diameter)
    rng = np.random.default_rng([scene.seed, index])
    distance = scene.distance_mm
    if scene.distance_jitter_mm:
        distance += rng.uniform(-scene.distance_jitter_mm, scene.distance_jitter_mm)
    tex = _texture(rng, scene.texture_amp)
    noise = rng.standard_normal((scene.height, scene.width)) if scene.noise_sigma else None

    h, w = scene.height, scene.width
    fpx = scene.pinhole.focal_mm * scene.pinhole.px_per_mm_sensor
    cx = scene.center[0]
    u = np.arange(w, dtype=np.float64) + 0.5
    wobble = (scene.wobble_px * np.sin(2 * np.pi * u / scene.wobble_period_px)
              if scene.wobble_px else np.zeros(w))
    img = np.full((h, w), float(scene.background))

    widths, centers, mm_per_px = {}, {}, {}
    for v in views(scene, distance, major, minor):
        center, half = band_geometry(scene, v)
        widths[v.name] = 2.0 * half
        centers[v.name] = center
        mm_per_px[v.name] = v.depth_mm / fpx
        if not scene.filament:
            continue
        tops = center + wobble - half
        bots = center + wobble + half
        if tops.min() < 0 or bots.max() > h:
            raise SceneOutOfFrame(f"{v.name} band rows [{tops.min():.1f}, {bots.max():.1f}] "
                                  f"exceed frame height {h}")
        r0 = int(math.floor(tops.min()))
        r1 = min(int(math.ceil(bots.max())) + 1, h)
        rows = np.arange(r0, r1, dtype=np.float64)[:, None]
        cov = np.clip(np.minimum(rows + 1.0, bots) - np.maximum(rows, tops), 0.0, 1.0)
        mid = 0.5 * (np.clip(rows, tops, bots) + np.clip(rows + 1.0, tops, bots))
        t = np.clip((mid - (center + wobble)) / half, -1.0, 1.0)
        alpha = np.arcsin(t)
        psi = np.deg2rad(v.angle_deg) + v.flip * alpha
        x_mm = (u - cx) * v.depth_mm / fpx
        fg = scene.albedo * (1.0 - scene.shading + scene.shading * np.cos(alpha))
        fg = fg * (1.0 + tex(x_mm[None, :], psi))
        for pit in scene.pits:
            if pit.frame is not None and pit.frame != index:
                continue
            along = np.exp(-((x_mm - pit.x_mm) / (0.5 * pit.length_mm)) ** 4)
            dpsi = np.angle(np.exp(1j * (psi - np.deg2rad(pit.angle_deg))))
            around = np.exp(-(dpsi / np.deg2rad(0.5 * pit.width_deg)) ** 4)
            fg = fg - pit.depth * along[None, :] * around
        block = img[r0:r1]
        img[r0:r1] = block * (1.0 - cov) + cov * fg

    if noise is not None:
        img = img + scene.noise_sigma * noise
    pixels = np.rint(np.clip(img, 0.0, 255.0)).astype(np.uint8)

    ext = ellipse_extents(major, minor, scene.orientation_rad)
    gt = GroundTruth(
        index=index,
        true_d_mm=0.5 * (major + minor),
        true_ovality_pct=(max(ext) - min(ext)) / scene.nominal_mm * 100.0,
        widths_px=widths,
        centers_px=centers,
        separation_px=abs(centers["main"] - centers["upper"]),
        distance_mm=distance,
        mm_per_px=mm_per_px,
        major_mm=major,
        minor_mm=minor,
    )
    return Frame(pixels, index=index), gt


def _profile_fn(profile, count: int) -> Callable[[int], object]:
    if profile is None:
        return lambda i: None
    if callable(profile):
        return profile
    if isinstance(profile, (int, float)):
        return lambda i: profile
    seq = list(profile)
    if len(seq) != count:
        raise ConfigError(f"profile has {len(seq)} entries for {count} frames")
    return lambda i: seq[i]


def profile_from_steps(steps: Sequence[dict], scene: SynthScene) -> Callable[[int], tuple]:
    """Piecewise-constant diameter profile from ``[{from_frame, major_mm, minor_mm}]``."""
    ordered = sorted(steps, key=lambda s: s["from_frame"])

    def fn(i):
        major, minor = scene.major_mm, scene.minor_mm
        for s in ordered:
            if i >= s["from_frame"]:
                major = s.get("major_mm", s.get("d_mm", major))
                minor = s.get("minor_mm", s.get("d_mm", major))
        return (major, minor)

    return fn


def render_sequence(scene: SynthScene, count: int, out_dir, profile=None,
                    suffix: str = ".png") -> list[GroundTruth]:
    """Write ``frame_0000.png ...`` and ``ground_truth.json`` into ``out_dir``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    out = Path(out_dir)
    fn = _profile_fn(profile, count)
    truths = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            frame, gt = render_frame(scene, i, fn(i))
            write_frame(out / f"frame_{i:04d}{suffix}", frame.pixels)
            truths.append(gt)
        doc = {"scene": scene.to_dict(), "frames": [gt.to_dict() for gt in truths]}
        (out / "ground_truth.json").write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write sequence to {out}: {exc}") from exc
    return truths


def load_ground_truth(path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "ground_truth.json"
    return json.loads(path.read_text())["frames"]


def default_rig(scene: SynthScene | None = None, margin_x: int = 20, gap: int = 3,
                **overrides) -> RigConfig:
    """ROIs splitting the frame halfway between the main band and each mirror band."""
    scene = SynthScene() if scene is None else scene
    centers = {v.name: band_geometry(scene, v)[0]
               for v in views(scene, scene.distance_mm, scene.major_mm, scene.minor_mm)}
    m1 = int(round(0.5 * (centers["upper"] + centers["main"])))
    m2 = int(round(0.5 * (centers["main"] + centers["lower"])))
    w = scene.width - 2 * margin_x
    params = dict(gradient_threshold=40.0, nominal_diameter_mm=scene.nominal_mm,
                  tolerance_mm=0.05, feed_rate_mm_s=10.0, period_s=1.0)
    params.update(overrides)
    return RigConfig(
        roi_main=Roi(margin_x, m1 + gap, w, m2 - m1 - 2 * gap),
        roi_upper=Roi(margin_x, 0, w, m1 - gap),
        roi_lower=Roi(margin_x, m2 + gap, w, scene.height - m2 - gap),
        **params,
    )


def with_distance(scene: SynthScene, distance_mm: float, **changes) -> SynthScene:
    return replace(scene, distance_mm=distance_mm, **changes)


__all__ = [
    "GroundTruth", "Pit", "SynthScene", "View", "area_coverage", "band_geometry",
    "default_rig", "ellipse_extents", "load_ground_truth", "profile_from_steps",
    "render_band", "render_frame", "render_sequence", "views", "with_distance",
]
