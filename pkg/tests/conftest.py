import numpy as np
import pytest

from gridbev.kitti import CalibrationSet, PointCloud


@pytest.fixture
def simple_calib():
    """Forward-facing camera: x_cam = -y_l, y_cam = -z_l, z_cam = x_l."""
    f, cx, cy = 700.0, 621.0, 187.5
    P2 = np.array([[f, 0, cx, 0], [0, f, cy, 0], [0, 0, 1, 0]], dtype=float)
    R0 = np.eye(3)
    Tr = np.array([[0, -1, 0, 0], [0, 0, -1, 0], [1, 0, 0, 0]], dtype=float)
    return CalibrationSet(P2, R0, Tr, (1242, 375))


def synthetic_scan(rng, n=20000, plane_z=-1.7):
    """Street-like scene: ground plane plus a few box-shaped obstacles."""
    n_ground = int(n * 0.7)
    gx = rng.uniform(1, 55, n_ground)
    gy = rng.uniform(-25, 25, n_ground)
    gz = np.full(n_ground, plane_z) + rng.normal(0, 0.02, n_ground)
    n_obj = n - n_ground
    cx = rng.uniform(5, 50, 8)
    cy = rng.uniform(-20, 20, 8)
    pick = rng.integers(0, 8, n_obj)
    ox = cx[pick] + rng.uniform(-1, 1, n_obj)
    oy = cy[pick] + rng.uniform(-1, 1, n_obj)
    oz = plane_z + rng.uniform(0.1, 1.8, n_obj)
    xyz = np.concatenate([
        np.stack([gx, gy, gz], axis=1),
        np.stack([ox, oy, oz], axis=1),
    ])
    return PointCloud(xyz, rng.uniform(0, 1, n))
