"""Robust ground plane estimation and ground / non-ground splitting.

The plane is fit by iteratively reweighted least squares with Cauchy weights,
which performs the nonlinear robust minimization of the accumulated squared
point-to-plane distance. Each IRLS step solves the weighted total least
squares plane (smallest eigenvector of the weighted scatter matrix).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kitti import PointCloud


class DegenerateInputError(ValueError):
    """Fewer than 3 usable points, or a rank-deficient normal system."""


@dataclass(frozen=True)
class PlaneParams:
    """Plane {p : normal . p + offset = 0}; normal is unit with normal.z > 0."""

    normal: np.ndarray  # (3,)
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise ValueError("zero normal")
        n = n / norm
        off = float(self.offset) / norm
        if n[2] < 0:
            n, off = -n, -off
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", off)


@dataclass(frozen=True)
class RobustFitConfig:
    cauchy_scale: float = 0.05        # meters
    max_iterations: int = 20
    convergence_tol: float = 1e-8     # relative cost decrease
    removal_threshold: float = 0.2    # meters

    def __post_init__(self):
        if self.cauchy_scale <= 0 or self.removal_threshold <= 0:
            raise ValueError("scales must be positive")


def signed_distance(plane: PlaneParams, points) -> np.ndarray:
    """normal . p + offset, positive on the normal (upward) side."""
    pts = np.asarray(points, dtype=np.float64)
    return pts @ plane.normal + plane.offset


def _weighted_plane(points: np.ndarray, weights: np.ndarray) -> PlaneParams:
    """Weighted total least squares plane through the weighted centroid."""
    wsum = weights.sum()
    if wsum <= 0:
        raise DegenerateInputError("all weights vanished")
    centroid = (weights[:, None] * points).sum(axis=0) / wsum
    d = points - centroid
    scatter = (weights[:, None] * d).T @ d
    evals, evecs = np.linalg.eigh(scatter)
    # Smallest eigenvalue direction is the normal; the two larger ones must
    # span a plane, otherwise the points are (near-)collinear.
    if evals[1] <= 1e-12 * max(evals[2], 1.0):
        raise DegenerateInputError("points are collinear")
    normal = evecs[:, 0]
    return PlaneParams(normal, -float(normal @ centroid))


def _cauchy_cost(dist: np.ndarray, scale: float) -> float:
    return float(scale ** 2 * np.log1p((dist / scale) ** 2).sum())


def fit_ground_plane(cloud: PointCloud, cfg: RobustFitConfig = RobustFitConfig()) -> PlaneParams:
    """Robust plane fit: Cauchy-weighted IRLS, seeded on the lowest 30% of points.

    Deterministic for a given cloud; iteration stops on relative cost
    stagnation, the iteration cap, or a (guarded) cost increase, so the
    cost sequence is non-increasing.
    """
    return fit_cost_trace(cloud, cfg)[0]


def fit_cost_trace(cloud: PointCloud, cfg: RobustFitConfig = RobustFitConfig()):
    """Like fit_ground_plane but also return the per-iteration cost sequence."""
    pts = cloud.xyz
    if pts.shape[0] < 3:
        raise DegenerateInputError(f"need >= 3 points, got {pts.shape[0]}")
    n_low = max(3, int(np.ceil(pts.shape[0] * 0.3)))
    lowest = pts[np.argsort(pts[:, 2], kind="stable")[:n_low]]
    plane = _weighted_plane(lowest, np.ones(len(lowest)))
    s = cfg.cauchy_scale
    costs = [_cauchy_cost(signed_distance(plane, pts), s)]
    for _ in range(cfg.max_iterations):
        r = signed_distance(plane, pts)
        w = 1.0 / (1.0 + (r / s) ** 2)
        candidate = _weighted_plane(pts, w)
        new_cost = _cauchy_cost(signed_distance(candidate, pts), s)
        if new_cost > costs[-1]:
            break
        plane = candidate
        costs.append(new_cost)
        if costs[-2] - new_cost <= cfg.convergence_tol * max(costs[-2], 1e-300):
            break
    return plane, costs


def split_ground(cloud: PointCloud, plane: PlaneParams,
                 cfg: RobustFitConfig = RobustFitConfig()):
    """Partition into (ground, non_ground) at the removal threshold.

    Ground is signed distance strictly below the threshold, including points
    far below the plane.
    """
    d = signed_distance(plane, cloud.xyz)
    mask = d < cfg.removal_threshold
    return cloud.select(mask), cloud.select(~mask)
