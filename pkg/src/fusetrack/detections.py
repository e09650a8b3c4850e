"""Sensor measurements and fused records shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class VisionDetection:
    """Camera detection.

    ``u`` is the horizontal center of the box and ``v`` its bottom edge row,
    so ``(u, v)`` is the bottom-center pixel used for ground-plane ranging.
    """

    id: str
    u: float
    v: float
    w: float
    h: float
    conf: float
    cls: str = "car"
    range: Optional[float] = None
    vel: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass
class RadarDetection:
    id: str
    range: float
    azimuth: float
    vel: float
    conf: float
    extra: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass
class Frame:
    t: float
    vision: list = field(default_factory=list)
    radar: list = field(default_factory=list)
    extra: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass(frozen=True)
class CommonFeature:
    """Modality-independent kinematics: range [m], azimuth [rad], radial velocity [m/s], confidence."""

    range: float
    azimuth: float
    velocity: float
    confidence: float

    def as_array(self):
        return np.array([self.range, self.azimuth, self.velocity, self.confidence], dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @property
    def x(self):
        return self.range * np.sin(self.azimuth)

    @property
    def y(self):
        return self.range * np.cos(self.azimuth)


VR, V, R = "VR", "V", "R"
TAGS = (VR, V, R)


@dataclass
class FusedDetection:
    """Main-sub record produced by intra-frame fusion.

    ``feature`` is the fused state (radar range/velocity, vision azimuth for VR).
    ``vision_feature`` / ``radar_feature`` keep the per-sensor views needed for
    same-sensor comparisons across frames. ``feature`` is None only for vision
    detections that could not be ranged.
    """

    tag: str
    vision: Optional[VisionDetection] = None
    radar: Optional[RadarDetection] = None
    feature: Optional[CommonFeature] = None
    vision_feature: Optional[CommonFeature] = None
    radar_feature: Optional[CommonFeature] = None
    similarity: Optional[float] = None
    stage: Optional[str] = None

    def __post_init__(self):
        if self.tag == VR and (self.vision is None or self.radar is None):
            raise ValueError("VR detection needs both members")
        if self.tag == V and (self.vision is None or self.radar is not None):
            raise ValueError("V detection must carry only a vision member")
        if self.tag == R and (self.radar is None or self.vision is not None):
            raise ValueError("R detection must carry only a radar member")

    @property
    def cls(self):
        return self.vision.cls if self.vision is not None else None

    @property
    def member_ids(self):
        ids = []
        if self.vision is not None:
            ids.append(self.vision.id)
        if self.radar is not None:
            ids.append(self.radar.id)
        return tuple(ids)
