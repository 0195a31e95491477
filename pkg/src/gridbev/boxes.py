"""Rotated BEV boxes, the three regression encodings, and exact rotated IoU."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class BoxEncoding(str, Enum):
    B1 = "B1"  # [x_c, y_c, w, h, sin(2*theta), cos(2*theta)]
    B2 = "B2"  # [x_c, y_c, w, h, theta]
    B3 = "B3"  # [x1, y1, x2, y2, w] -- midpoints of the two width-sides


def normalize_heading(theta: float) -> float:
    """Wrap a heading into [-pi/2, pi/2); boxes are symmetric under pi."""
    t = math.fmod(theta + math.pi / 2, math.pi)
    if t < 0:
        t += math.pi
    return t - math.pi / 2


@dataclass(frozen=True)
class RotatedBox:
    """BEV rectangle: center, extent along heading (length), lateral extent (width)."""

    x_c: float
    y_c: float
    length: float
    width: float
    theta: float  # radians vs. grid x-axis, canonical in [-pi/2, pi/2)

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "theta", normalize_heading(self.theta))

    def corners(self) -> np.ndarray:
        """Counter-clockwise corners, (4, 2)."""
        hl, hw = self.length / 2, self.width / 2
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.x_c, self.y_c])


@dataclass(frozen=True)
class EncodedBox:
    encoding: BoxEncoding
    params: tuple


def encode(box: RotatedBox, encoding: BoxEncoding) -> EncodedBox:
    enc = BoxEncoding(encoding)
    if enc is BoxEncoding.B1:
        return EncodedBox(enc, (box.x_c, box.y_c, box.width, box.length,
                                math.sin(2 * box.theta), math.cos(2 * box.theta)))
    if enc is BoxEncoding.B2:
        return EncodedBox(enc, (box.x_c, box.y_c, box.width, box.length, box.theta))
    # B3: midpoints of the two sides whose extent is the width, i.e. the
    # front/rear faces, length apart along the heading.
    dx = math.cos(box.theta) * box.length / 2
    dy = math.sin(box.theta) * box.length / 2
    return EncodedBox(enc, (box.x_c - dx, box.y_c - dy,
                            box.x_c + dx, box.y_c + dy, box.width))


def decode(enc: EncodedBox) -> RotatedBox:
    p = enc.params
    if enc.encoding is BoxEncoding.B1:
        x, y, w, h, s2, c2 = p
        norm = math.hypot(s2, c2)
        if norm < 1e-12:
            raise ValueError("B1 angle pair (sin 2t, cos 2t) is zero: undefined angle")
        return RotatedBox(x, y, h, w, math.atan2(s2, c2) / 2)
    if enc.encoding is BoxEncoding.B2:
        x, y, w, h, theta = p
        return RotatedBox(x, y, h, w, theta)
    x1, y1, x2, y2, w = p
    length = math.hypot(x2 - x1, y2 - y1)
    if length < 1e-12:
        raise ValueError("B3 points coincide: undefined box")
    return RotatedBox((x1 + x2) / 2, (y1 + y2) / 2, length, w,
                      math.atan2(y2 - y1, x2 - x1))


def _polygon_area(poly) -> float:
    """Signed shoelace area; positive for counter-clockwise order."""
    a = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return a / 2


def _clip_polygon(poly, a, b):
    """Sutherland-Hodgman: keep the half-plane left of directed edge a->b."""
    ex, ey = b[0] - a[0], b[1] - a[1]
    out = []
    n = len(poly)
    for i in range(n):
        p = poly[i]
        q = poly[(i + 1) % n]
        side_p = ex * (p[1] - a[1]) - ey * (p[0] - a[0])
        side_q = ex * (q[1] - a[1]) - ey * (q[0] - a[0])
        if side_p >= 0:
            out.append(p)
            if side_q < 0:
                t = side_p / (side_p - side_q)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        elif side_q > 0:
            t = side_p / (side_p - side_q)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def intersection_area(a: RotatedBox, b: RotatedBox) -> float:
    ca = [tuple(p) for p in a.corners()]
    cb = [tuple(p) for p in b.corners()]
    poly = ca
    for i in range(4):
        poly = _clip_polygon(poly, cb[i], cb[(i + 1) % 4])
        if len(poly) < 3:
            return 0.0
    return abs(_polygon_area(poly))


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    inter = intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    union = a.length * a.width + b.length * b.width - inter
    return inter / union


def aabb(box: RotatedBox):
    """Axis-aligned hull (x_min, y_min, x_max, y_max) of the rotated box."""
    c = box.corners()
    return (c[:, 0].min(), c[:, 1].min(), c[:, 0].max(), c[:, 1].max())


def aabb_iou(a, b) -> float:
    """IoU of two axis-aligned boxes given as (x_min, y_min, x_max, y_max)."""
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)
