import math

import numpy as np
import pytest

from gridbev.ground import (DegenerateInputError, PlaneParams, RobustFitConfig,
                            fit_cost_trace, fit_ground_plane, signed_distance,
                            split_ground)
from gridbev.kitti import PointCloud


def plane_cloud(rng, n=2000, z=-1.73, outlier_frac=0.2, noise=0.01):
    """Points on z = const with uniform outliers in z within [0, 2]."""
    n_out = int(n * outlier_frac)
    xy = rng.uniform(-20, 20, (n, 2))
    zs = np.full(n, z) + rng.normal(0, noise, n)
    zs[:n_out] = rng.uniform(0.0, 2.0, n_out)
    order = rng.permutation(n)
    xyz = np.column_stack([xy, zs])[order]
    return PointCloud(xyz, rng.uniform(0, 1, n)), order < n_out


def test_exact_horizontal_plane():
    rng = np.random.default_rng(0)
    xy = rng.uniform(-10, 10, (100, 2))
    cloud = PointCloud(np.column_stack([xy, np.zeros(100)]), np.zeros(100))
    plane = fit_ground_plane(cloud)
    np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-9)
    assert abs(plane.offset) < 1e-9


def test_recovers_plane_under_outliers():
    rng = np.random.default_rng(1)
    cloud, _ = plane_cloud(rng)
    plane = fit_ground_plane(cloud)
    # plane z = -1.73: normal (0,0,1), offset 1.73
    angle = math.degrees(math.acos(min(1.0, plane.normal[2])))
    assert angle < 0.5
    assert abs(plane.offset - 1.73) < 0.01


def test_two_points_degenerate():
    cloud = PointCloud(np.array([[0, 0, 0], [1, 0, 0]], dtype=float), np.zeros(2))
    with pytest.raises(DegenerateInputError):
        fit_ground_plane(cloud)


def test_collinear_points_degenerate():
    t = np.linspace(0, 1, 50)
    cloud = PointCloud(np.column_stack([t, 2 * t, 3 * t]), np.zeros(50))
    with pytest.raises(DegenerateInputError):
        fit_ground_plane(cloud)


def test_cost_non_increasing():
    rng = np.random.default_rng(2)
    cloud, _ = plane_cloud(rng, noise=0.05)
    _, costs = fit_cost_trace(cloud)
    assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))


def test_matches_inlier_only_least_squares():
    rng = np.random.default_rng(3)
    cloud, is_outlier = plane_cloud(rng, noise=0.005)
    plane = fit_ground_plane(cloud)
    inliers = cloud.xyz[~is_outlier]
    # Oracle: unweighted total least squares on the clean inliers.
    centroid = inliers.mean(axis=0)
    _, _, vt = np.linalg.svd(inliers - centroid)
    n = vt[-1]
    if n[2] < 0:
        n = -n
    assert abs(np.dot(plane.normal, n)) > math.cos(math.radians(0.5))
    assert abs(plane.offset - (-n @ centroid)) < 0.01


def test_intensity_scaling_leaves_fit_unchanged():
    rng = np.random.default_rng(4)
    cloud, _ = plane_cloud(rng)
    scaled = PointCloud(cloud.xyz, cloud.intensity * 0.5)
    a = fit_ground_plane(cloud)
    b = fit_ground_plane(scaled)
    np.testing.assert_array_equal(a.normal, b.normal)
    assert a.offset == b.offset


class TestSignedDistance:
    plane = PlaneParams(np.array([0.0, 0.0, 1.0]), 0.0)

    def test_on_plane(self):
        assert signed_distance(self.plane, [[3.0, 4.0, 0.0]])[0] == 0.0

    def test_above_plane(self):
        assert signed_distance(self.plane, [[0.0, 0.0, 2.0]])[0] == 2.0

    def test_matches_projection_oracle(self):
        rng = np.random.default_rng(5)
        n = rng.normal(size=3)
        plane = PlaneParams(n, rng.normal())
        pts = rng.uniform(-10, 10, (200, 3))
        d = signed_distance(plane, pts)
        proj = pts - d[:, None] * plane.normal
        np.testing.assert_allclose(signed_distance(plane, proj), 0, atol=1e-9)
        np.testing.assert_allclose(np.abs(d), np.linalg.norm(pts - proj, axis=1),
                                   atol=1e-9)


class TestSplit:
    plane = PlaneParams(np.array([0.0, 0.0, 1.0]), 0.0)
    cfg = RobustFitConfig()

    def test_threshold_boundaries(self):
        cloud = PointCloud(np.array([[0, 0, 0.19], [0, 0, 0.21]], dtype=float),
                           np.zeros(2))
        ground, non_ground = split_ground(cloud, self.plane, self.cfg)
        assert ground.xyz[0, 2] == 0.19
        assert non_ground.xyz[0, 2] == 0.21

    def test_far_below_plane_is_ground(self):
        cloud = PointCloud(np.array([[0, 0, -5.0]]), np.zeros(1))
        ground, non_ground = split_ground(cloud, self.plane, self.cfg)
        assert len(ground) == 1 and len(non_ground) == 0

    def test_exact_partition(self):
        rng = np.random.default_rng(6)
        cloud = PointCloud(rng.uniform(-2, 2, (500, 3)), rng.uniform(0, 1, 500))
        ground, non_ground = split_ground(cloud, self.plane, self.cfg)
        assert len(ground) + len(non_ground) == 500
