"""Anchor grid generation, anchor-to-ground-truth matching, regression targets.

Anchors are axis-aligned boxes tiled over the BEV grid at a fixed cell
stride, in sizes S = {1.75, 2.5, 9, 22} m and aspect ratios 1:1, 2:1, 1:2
(area preserving: extent (s*sqrt(r), s/sqrt(r))). Matching follows the
Faster R-CNN RPN rule against the axis-aligned hull of each rotated ground
truth box: positive at IoU >= 0.7 or as a ground truth's best anchor,
negative below 0.3, ignored in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import BoxEncoding, RotatedBox, aabb, encode
from .grid import GridConfig

POSITIVE_IOU = 0.7
NEGATIVE_IOU = 0.3

LABEL_NEGATIVE = -1
LABEL_IGNORE = -2


@dataclass(frozen=True)
class AnchorConfig:
    sizes: tuple = (1.75, 2.5, 9.0, 22.0)
    aspect_ratios: tuple = (1.0, 2.0, 0.5)   # r in r:1, extent (s*sqrt(r), s/sqrt(r))
    stride: int = 16                         # in cells
    grid: GridConfig = field(default_factory=GridConfig)

    def __post_init__(self):
        if list(self.sizes) != sorted(self.sizes) or min(self.sizes) <= 0:
            raise ValueError("sizes must be positive ascending")
        if self.stride <= 0:
            raise ValueError("stride must be positive")

    @property
    def locations(self):
        # Full stride blocks only; for cell counts not divisible by the
        # stride the trailing partial block carries no anchors.
        return self.grid.nx // self.stride, self.grid.ny // self.stride


@dataclass(frozen=True)
class AnchorGrid:
    """Axis-aligned anchors as (N, 4) rows [x_c, y_c, w, h] in sensor frame."""

    boxes: np.ndarray
    location_index: np.ndarray  # (N,) flat location id, location-major ordering
    config: AnchorConfig


def generate_anchors(cfg: AnchorConfig) -> AnchorGrid:
    """Tile anchors location-major, then by size, then by aspect ratio."""
    g = cfg.grid
    n_lu, n_lv = cfg.locations
    if n_lu == 0 or n_lv == 0:
        raise ValueError("stride larger than grid")
    step = cfg.stride * g.cell_size
    # Stride-block centers, converted from grid-local to sensor frame.
    u = (np.arange(n_lu) + 0.5) * step + g.sensor_origin[0]
    v = (np.arange(n_lv) + 0.5) * step - g.extent[1] / 2 + g.sensor_origin[1]

    shapes = np.array([(s * math.sqrt(r), s / math.sqrt(r))
                       for s in cfg.sizes for r in cfg.aspect_ratios])
    n_shape = len(shapes)

    uu, vv = np.meshgrid(u, v, indexing="ij")
    centers = np.stack([uu.ravel(), vv.ravel()], axis=1)      # (L, 2)
    n_loc = centers.shape[0]
    boxes = np.empty((n_loc * n_shape, 4))
    boxes[:, :2] = np.repeat(centers, n_shape, axis=0)
    boxes[:, 2:] = np.tile(shapes, (n_loc, 1))
    loc_idx = np.repeat(np.arange(n_loc), n_shape)
    return AnchorGrid(boxes, loc_idx, cfg)


@dataclass(frozen=True)
class MatchResult:
    labels: np.ndarray        # (N,) int: gt index if >= 0, else NEGATIVE/IGNORE
    max_iou: np.ndarray       # (N,) float
    gt_hulls: np.ndarray      # (G, 4) [x_min, y_min, x_max, y_max]


def _anchor_bounds(boxes: np.ndarray) -> np.ndarray:
    out = np.empty_like(boxes)
    out[:, 0] = boxes[:, 0] - boxes[:, 2] / 2
    out[:, 1] = boxes[:, 1] - boxes[:, 3] / 2
    out[:, 2] = boxes[:, 0] + boxes[:, 2] / 2
    out[:, 3] = boxes[:, 1] + boxes[:, 3] / 2
    return out


def _pairwise_aabb_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix between (N, 4) and (G, 4) corner-form boxes."""
    ix = (np.minimum(a[:, None, 2], b[None, :, 2])
          - np.maximum(a[:, None, 0], b[None, :, 0])).clip(min=0)
    iy = (np.minimum(a[:, None, 3], b[None, :, 3])
          - np.maximum(a[:, None, 1], b[None, :, 1])).clip(min=0)
    inter = ix * iy
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def match_anchors(grid: AnchorGrid, gt_boxes) -> MatchResult:
    """Label every anchor against the ground truth boxes' axis-aligned hulls."""
    n = grid.boxes.shape[0]
    anchors = _anchor_bounds(grid.boxes)
    hulls = np.array([aabb(b) for b in gt_boxes]).reshape(-1, 4)
    if hulls.shape[0] == 0:
        return MatchResult(np.full(n, LABEL_NEGATIVE), np.zeros(n), hulls)

    iou = _pairwise_aabb_iou(anchors, hulls)   # (N, G)
    best_gt = iou.argmax(axis=1)               # ties -> lowest gt index
    max_iou = iou[np.arange(n), best_gt]

    labels = np.full(n, LABEL_IGNORE, dtype=np.int64)
    labels[max_iou < NEGATIVE_IOU] = LABEL_NEGATIVE
    pos = max_iou >= POSITIVE_IOU
    labels[pos] = best_gt[pos]
    # Forced match: each ground truth claims its best-IoU anchor
    # (lowest anchor index on ties), even below the positive threshold.
    for g in range(hulls.shape[0]):
        a = int(iou[:, g].argmax())
        labels[a] = g
    return MatchResult(labels, max_iou, hulls)


def compute_target_v(anchor, hull) -> np.ndarray:
    """Axis-aligned target: normalized center shift and log extent ratios.

    anchor is [x_c, y_c, w, h]; hull is the GT's axis-aligned bounds.
    """
    xa, ya, wa, ha = anchor
    if wa <= 0 or ha <= 0:
        raise ValueError("non-positive anchor extents")
    wg = hull[2] - hull[0]
    hg = hull[3] - hull[1]
    if wg <= 0 or hg <= 0:
        raise ValueError("non-positive ground truth extents")
    xg = (hull[0] + hull[2]) / 2
    yg = (hull[1] + hull[3]) / 2
    return np.array([(xg - xa) / wa, (yg - ya) / ha,
                     math.log(wg / wa), math.log(hg / ha)])


def apply_target_v(anchor, v) -> np.ndarray:
    """Inverse of compute_target_v; returns the hull [x_min, y_min, x_max, y_max]."""
    xa, ya, wa, ha = anchor
    xg = v[0] * wa + xa
    yg = v[1] * ha + ya
    wg = math.exp(v[2]) * wa
    hg = math.exp(v[3]) * ha
    return np.array([xg - wg / 2, yg - hg / 2, xg + wg / 2, yg + hg / 2])


def compute_target_u(anchor, gt: RotatedBox, encoding) -> np.ndarray:
    """Inclined target: the encoded rotated GT relative to the anchor.

    Positional components use the v-style normalization (center shifts over
    anchor extents, extents as log ratios); angular components are raw.
    """
    enc = BoxEncoding(encoding)
    xa, ya, wa, ha = anchor
    p = encode(gt, enc).params
    if enc is BoxEncoding.B3:
        x1, y1, x2, y2, w = p
        return np.array([(x1 - xa) / wa, (y1 - ya) / ha,
                         (x2 - xa) / wa, (y2 - ya) / ha, math.log(w / wa)])
    x, y, w, h = p[:4]
    head = [(x - xa) / wa, (y - ya) / ha, math.log(w / wa), math.log(h / ha)]
    return np.array(head + list(p[4:]))


def apply_target_u(anchor, u, encoding) -> RotatedBox:
    """Inverse of compute_target_u: recover the rotated box from the offset."""
    from .boxes import EncodedBox, decode

    enc = BoxEncoding(encoding)
    xa, ya, wa, ha = anchor
    if enc is BoxEncoding.B3:
        params = (u[0] * wa + xa, u[1] * ha + ya,
                  u[2] * wa + xa, u[3] * ha + ya, math.exp(u[4]) * wa)
    else:
        params = tuple([u[0] * wa + xa, u[1] * ha + ya,
                        math.exp(u[2]) * wa, math.exp(u[3]) * ha] + list(u[4:]))
    return decode(EncodedBox(enc, params))
