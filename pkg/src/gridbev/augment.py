"""Seeded scene augmentation: lateral mirror flip and bounded yaw rotation.

Both transforms act on the point cloud and the label boxes consistently,
before rasterization, about the sensor origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxes import RotatedBox
from .kitti import PointCloud

DEFAULT_ROTATION_RANGE = math.radians(15.0)


@dataclass(frozen=True)
class AugmentConfig:
    flip_probability: float = 0.5
    rotation_range: float = DEFAULT_ROTATION_RANGE  # radians, draw in [-range, range]
    seed: int = 0

    def __post_init__(self):
        if self.rotation_range < 0:
            raise ValueError("rotation_range must be non-negative")
        if not 0 <= self.flip_probability <= 1:
            raise ValueError("flip_probability must be in [0, 1]")


def flip_x(cloud: PointCloud, labels):
    """Mirror about the forward (x) axis: y -> -y, heading -> -heading."""
    xyz = cloud.xyz.copy()
    xyz[:, 1] = -xyz[:, 1]
    flipped = [RotatedBox(b.x_c, -b.y_c, b.length, b.width, -b.theta) for b in labels]
    return PointCloud(xyz, cloud.intensity.copy()), flipped


def rotate_scene(cloud: PointCloud, labels, angle: float):
    """Rotate points and boxes by angle around the sensor origin (z unchanged)."""
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    xyz = cloud.xyz.copy()
    xyz[:, :2] = xyz[:, :2] @ rot.T
    rotated = []
    for b in labels:
        x, y = rot @ (b.x_c, b.y_c)
        rotated.append(RotatedBox(x, y, b.length, b.width, b.theta + angle))
    return PointCloud(xyz, cloud.intensity.copy()), rotated


def augment_sample(cloud: PointCloud, labels, cfg: AugmentConfig, draw_index: int = 0):
    """Randomly flip then rotate; deterministic given (seed, draw_index).

    Returns (cloud, labels, applied) with applied = {"flipped": bool,
    "angle": radians} for provenance.
    """
    rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, draw_index])
    flipped = bool(rng.random() < cfg.flip_probability)
    angle = float(rng.uniform(-cfg.rotation_range, cfg.rotation_range)) \
        if cfg.rotation_range > 0 else 0.0
    if flipped:
        cloud, labels = flip_x(cloud, labels)
    if angle != 0.0:
        cloud, labels = rotate_scene(cloud, labels, angle)
    else:
        cloud, labels = PointCloud(cloud.xyz.copy(), cloud.intensity.copy()), list(labels)
    return cloud, labels, {"flipped": flipped, "angle": angle}
