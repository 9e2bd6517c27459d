"""Spool winding arithmetic.

Layers are concentric cylinders with radial pitch ``d``: layer ``k`` has
radius ``R + (k - 1) d`` and holds ``n`` turns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LayerOutOfRange


@dataclass(frozen=True)
class SpoolSpec:
    R: float  # spool radius, mm
    n: int  # filament diameters across the spool width
    m: int  # number of layers
    d: float  # filament diameter, mm

    def __post_init__(self):
        if not self.R > 0 or not self.d > 0:
            raise ValueError("R and d must be positive")
        for name in ("n", "m"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
            object.__setattr__(self, name, int(v))


@dataclass(frozen=True)
class WindingSchedule:
    omega_rev_s: np.ndarray  # spool speed per layer
    durations_s: np.ndarray  # time spent winding each layer
    switch_times_s: np.ndarray  # time at which layer k is complete


def layer_length(spec: SpoolSpec, k: int) -> float:
    if not 1 <= k <= spec.m:
        raise LayerOutOfRange(f"layer {k} outside 1..{spec.m}")
    return 2 * math.pi * spec.n * (spec.R + (k - 1) * spec.d)


def total_length(spec: SpoolSpec) -> float:
    """Total filament length on a full spool, mm."""
    # sum_{i=2..m} (i - 1) = m (m - 1) / 2; empty for m = 1
    tail = spec.m * (spec.m - 1) / 2 * spec.d
    return 2 * math.pi * spec.n * (spec.R * spec.m + tail)


def speed_schedule(spec: SpoolSpec, feed_rate: float) -> WindingSchedule:
    """Stepwise spool speed that keeps the filament feed constant."""
    if not feed_rate > 0:
        raise ValueError("feed_rate must be positive")
    k = np.arange(1, spec.m + 1)
    radius = spec.R + (k - 1) * spec.d
    omega = feed_rate / (2 * math.pi * radius)
    durations = 2 * math.pi * spec.n * radius / feed_rate
    return WindingSchedule(omega, durations, np.cumsum(durations))
