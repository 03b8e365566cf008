"""Kinect-style camera geometry.

Pixels map linearly to viewing angles (``hfov/width`` degrees per pixel), and
a pixel plus its depth reading maps to centimetres through

    x = -D sin(alpha) cos(beta),   y = D sin(beta),   z = D,   D = depth_mm / 10

with the image centre at angle zero. ``project_to_pixel`` is the exact
algebraic inverse, used by the synthetic renderer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidDepthError, OutOfFrustumError, PairingError


_FOV_EPS = 1e-9


class Point3D(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class CameraModel:
    width: int = 640
    height: int = 480
    hfov: float = 57.0
    vfov: float = 43.0
    center: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if not (0 < self.hfov < 180 and 0 < self.vfov < 180):
            raise ValueError("fields of view must lie in (0, 180) degrees")
        if self.center is None:
            object.__setattr__(self, "center", (self.width / 2, self.height / 2))
        a0, b0 = self.center
        if not (0 < a0 < self.width and 0 < b0 < self.height):
            raise ValueError(f"image centre {self.center} is not inside the image")


@dataclass(frozen=True)
class Offset2D:
    """Pixel displacement from an RGB detection to the same marker in depth."""

    dx: float = 0.0
    dy: float = 0.0


def pixel_to_angles(cam: CameraModel, at) -> tuple[float, float]:
    """Return (alpha, beta) in degrees for pixel ``at = (a_i, b_i)``."""
    a_i, b_i = at
    a0, b0 = cam.center
    alpha = (a0 - a_i) * cam.hfov / cam.width
    beta = (b0 - b_i) * cam.vfov / cam.height
    return alpha, beta


def reconstruct_3d(cam: CameraModel, at, depth: float) -> Point3D:
    """Pixel + depth (mm) to a camera-frame point in centimetres."""
    if not depth > 0:
        raise InvalidDepthError(f"depth must be positive, got {depth}")
    alpha, beta = pixel_to_angles(cam, at)
    a, b = math.radians(alpha), math.radians(beta)
    d = depth / 10.0
    return Point3D(-d * math.sin(a) * math.cos(b), d * math.sin(b), d)


def project_to_pixel(cam: CameraModel, p) -> tuple[tuple[float, float], float]:
    """Inverse of :func:`reconstruct_3d`: returns ((a_i, b_i), depth_mm)."""
    x, y, z = p
    if not z > 0:
        raise OutOfFrustumError(f"point {tuple(p)} is behind the camera")
    sin_b = y / z
    if abs(sin_b) > 1:
        raise OutOfFrustumError(f"point {tuple(p)}: |y| > z")
    beta = math.asin(sin_b)
    sin_a = -x / (z * math.cos(beta))
    if abs(sin_a) > 1:
        raise OutOfFrustumError(f"point {tuple(p)}: lateral offset exceeds range")
    alpha = math.asin(sin_a)
    alpha_deg, beta_deg = math.degrees(alpha), math.degrees(beta)
    # rounding slack so the image border itself stays inside
    if abs(alpha_deg) > cam.hfov / 2 + _FOV_EPS or abs(beta_deg) > cam.vfov / 2 + _FOV_EPS:
        raise OutOfFrustumError(
            f"point {tuple(p)} at ({alpha_deg:.2f}, {beta_deg:.2f}) deg is outside the field of view"
        )
    a0, b0 = cam.center
    a_i = a0 - alpha_deg * cam.width / cam.hfov
    b_i = b0 - beta_deg * cam.height / cam.vfov
    return (a_i, b_i), 10.0 * z


def estimate_offset(rgb_detections, depth_detections) -> Offset2D:
    """Mean (depth - rgb) centroid displacement over nearest-neighbour pairs.

    Accepts :class:`~neckflex.detect.Detection2D` objects or bare (x, y)
    pairs. Raises :class:`PairingError` on empty input, unequal counts, or
    when two RGB detections share the same nearest depth detection.
    """
    rgb = np.array([_xy(d) for d in rgb_detections], dtype=float).reshape(-1, 2)
    depth = np.array([_xy(d) for d in depth_detections], dtype=float).reshape(-1, 2)
    if len(rgb) == 0 or len(depth) == 0:
        raise PairingError("offset estimation needs at least one detection per stream")
    if len(rgb) != len(depth):
        raise PairingError(f"unequal detection counts: {len(rgb)} rgb vs {len(depth)} depth")
    dist = np.linalg.norm(rgb[:, None, :] - depth[None, :, :], axis=2)
    nearest = dist.argmin(axis=1)
    if len(set(nearest.tolist())) != len(nearest):
        raise PairingError("ambiguous pairing: two rgb detections share a nearest depth detection")
    diff = depth[nearest] - rgb
    dx, dy = diff.mean(axis=0)
    return Offset2D(float(dx), float(dy))


def _xy(d):
    c = getattr(d, "centroid", d)
    return float(c[0]), float(c[1])
