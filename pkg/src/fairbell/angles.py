"""Polarization-angle helpers.

Polarization is axis-like: an angle and the same angle plus pi describe the
same axis, so every angle in this package is stored in radians canonicalized
to [0, pi). User-facing surfaces (config files, CSV) speak degrees.
"""

from __future__ import annotations

import math

import numpy as np

PI = math.pi


def canon_angle(x: float) -> float:
    """Reduce an angle in radians to the canonical axis range [0, pi)."""
    if not math.isfinite(x):
        raise ValueError(f"angle must be finite, got {x!r}")
    r = x % PI
    # float % can round up to the divisor itself for tiny negative inputs
    if r >= PI:
        r = 0.0
    return r


def canon_angle_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`canon_angle` (no finiteness check)."""
    r = np.mod(x, PI)
    return np.where(r >= PI, 0.0, r)


def radians_from_degrees(deg: float) -> float:
    """Degrees to canonical radians (mod 180 degrees)."""
    return canon_angle(math.radians(deg))


def degrees_from_radians(rad: float) -> float:
    """Canonical radians to degrees in [0, 180)."""
    return math.degrees(canon_angle(rad))


def axis_distance(a: float, b: float) -> float:
    """Distance between two polarization axes, in [0, pi/2]."""
    d = abs(canon_angle(a) - canon_angle(b))
    return min(d, PI - d)
