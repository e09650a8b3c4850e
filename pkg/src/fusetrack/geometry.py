"""Monocular ranging, online pitch compensation and image <-> bird's-eye-view conversion.

Conventions: the vehicle frame has x lateral (positive right) and y longitudinal
(forward), both on the road plane, with the camera at height ``mount_height``
above the origin. Image rows grow downward; a positive pitch tilts the optical
axis toward the road. Azimuth is measured from straight ahead, positive right.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import HorizonDegenerate, InvalidExtent

logger = logging.getLogger(__name__)

MAX_PITCH = math.pi / 4


@dataclass
class CameraModel:
    focal_length: float = 1260.0
    principal_row: float = 450.0
    principal_col: float = 800.0
    mount_height: float = 1.5
    pitch: float = 0.0
    pitch_smoothing: float = 0.3
    image_width: int = 1600
    image_height: int = 900

    def __post_init__(self):
        if not self.focal_length > 0:
            raise ValueError("focal_length must be positive")
        if not self.mount_height > 0:
            raise ValueError("mount_height must be positive")
        if not abs(self.pitch) < MAX_PITCH:
            raise ValueError("pitch must satisfy |pitch| < pi/4")
        if not 0.0 <= self.pitch_smoothing <= 1.0:
            raise ValueError("pitch_smoothing must lie in [0, 1]")

    def copy(self, **changes):
        params = dict(self.__dict__)
        params.update(changes)
        return CameraModel(**params)


@dataclass(frozen=True)
class BevPoint:
    range: float
    azimuth: float
    x: float
    y: float


def trig_range(camera, vp, pitch=None):
    """Forward ground distance of the road point imaged at row ``vp``.

    Uses the flat-road model Z = h / tan(alpha + pitch) with
    alpha = arctan((vp - vo) / f).
    """
    pitch = camera.pitch if pitch is None else pitch
    alpha = math.atan((vp - camera.principal_row) / camera.focal_length)
    angle = alpha + pitch
    if angle <= 0.0:
        raise HorizonDegenerate(f"row {vp:.3f} is at or above the horizon (angle {angle:.6f} rad)")
    return camera.mount_height / math.tan(angle)


def size_range(camera, image_extent, physical_extent):
    """Pinhole proportion Z = f * S / s."""
    if not image_extent > 0 or not physical_extent > 0:
        raise InvalidExtent(f"extents must be positive, got image={image_extent}, physical={physical_extent}")
    return camera.focal_length * physical_extent / image_extent


def pitch_from_pair(camera, reference_range, vp):
    """Pitch implied by one ground point whose forward distance is known."""
    return math.atan(camera.mount_height / reference_range) - math.atan(
        (vp - camera.principal_row) / camera.focal_length
    )


def estimate_pitch(camera, pairs, smoothing=None):
    """Update ``camera.pitch`` from (reference forward distance, image row) pairs.

    The per-pair estimates are reduced with the median, then blended into the
    current pitch with factor ``smoothing`` (defaults to ``camera.pitch_smoothing``;
    1.0 replaces the pitch outright). Aggregates with |pitch| >= pi/4 are
    discarded. Returns the pitch after the update.
    """
    lam = camera.pitch_smoothing if smoothing is None else smoothing
    estimates = [pitch_from_pair(camera, z, vp) for z, vp in pairs if z > 0]
    if not estimates:
        return camera.pitch
    aggregate = float(np.median(estimates))
    if not abs(aggregate) < MAX_PITCH:
        logger.warning("discarding implausible pitch estimate %.4f rad", aggregate)
        return camera.pitch
    camera.pitch = (1.0 - lam) * camera.pitch + lam * aggregate
    return camera.pitch


def lateral_offset(camera, u, forward, pitch=None):
    """Lateral ground coordinate of a point at forward distance ``forward`` imaged at column ``u``."""
    pitch = camera.pitch if pitch is None else pitch
    depth = forward * math.cos(pitch) + camera.mount_height * math.sin(pitch)
    return (u - camera.principal_col) * depth / camera.focal_length


def vision_to_bev(camera, det, pitch=None):
    """Polar BEV position of a vision detection's bottom-center point."""
    forward = trig_range(camera, det.v, pitch)
    x = lateral_offset(camera, det.u, forward, pitch)
    return BevPoint(range=math.hypot(x, forward), azimuth=math.atan2(x, forward), x=x, y=forward)


def project_ground_point(camera, x, y, height=0.0, pitch=None):
    """Image (column, row) of the point (x, y, height) for the pitched pinhole camera."""
    pitch = camera.pitch if pitch is None else pitch
    dz = height - camera.mount_height
    cp, sp = math.cos(pitch), math.sin(pitch)
    depth = y * cp - dz * sp
    if depth <= 0:
        raise HorizonDegenerate("point behind the camera")
    down = -y * sp - dz * cp
    return (
        camera.principal_col + camera.focal_length * x / depth,
        camera.principal_row + camera.focal_length * down / depth,
    )
