import math

import numpy as np
import pytest
from scipy import stats

from gridbev.augment import AugmentConfig, augment_sample, flip_x, rotate_scene
from gridbev.boxes import RotatedBox, rotated_iou
from gridbev.kitti import PointCloud


def scene(rng, n=200, n_boxes=4):
    cloud = PointCloud(rng.uniform(-20, 20, (n, 3)), rng.uniform(0, 1, n))
    boxes = [RotatedBox(rng.uniform(-15, 15), rng.uniform(-15, 15),
                        rng.uniform(1, 6), rng.uniform(0.5, 2.5),
                        rng.uniform(-math.pi, math.pi)) for _ in range(n_boxes)]
    return cloud, boxes


def corners_set(boxes):
    return [np.sort(b.corners(), axis=0) for b in boxes]


class TestFlip:
    def test_point_mirroring(self):
        cloud = PointCloud(np.array([[3.0, 2.0, 1.0]]), np.array([0.4]))
        out, _ = flip_x(cloud, [])
        np.testing.assert_array_equal(out.xyz[0], [3.0, -2.0, 1.0])
        assert out.intensity[0] == 0.4

    def test_involution(self):
        rng = np.random.default_rng(0)
        cloud, boxes = scene(rng)
        c2, b2 = flip_x(*flip_x(cloud, boxes))
        np.testing.assert_allclose(c2.xyz, cloud.xyz, atol=1e-12)
        for orig, back in zip(boxes, b2):
            assert abs(orig.x_c - back.x_c) < 1e-12
            assert abs(orig.y_c - back.y_c) < 1e-12
            d = abs(orig.theta - back.theta) % math.pi
            assert min(d, math.pi - d) < 1e-12

    def test_box_corners_match_point_transform(self):
        rng = np.random.default_rng(1)
        _, boxes = scene(rng)
        _, flipped = flip_x(PointCloud(np.empty((0, 3)), np.empty(0)), boxes)
        for orig, f in zip(boxes, flipped):
            mirrored = orig.corners() * np.array([1.0, -1.0])
            got = f.corners()
            assert {tuple(np.round(p, 9)) for p in mirrored} == \
                   {tuple(np.round(p, 9)) for p in got}


class TestRotate:
    def test_zero_angle_identity(self):
        rng = np.random.default_rng(2)
        cloud, boxes = scene(rng)
        out, out_boxes = rotate_scene(cloud, boxes, 0.0)
        np.testing.assert_array_equal(out.xyz, cloud.xyz)
        for a, b in zip(boxes, out_boxes):
            assert a == b

    def test_isometry_about_origin(self):
        rng = np.random.default_rng(3)
        cloud, boxes = scene(rng)
        out, _ = rotate_scene(cloud, boxes, 0.37)
        before = np.hypot(cloud.xyz[:, 0], cloud.xyz[:, 1])
        after = np.hypot(out.xyz[:, 0], out.xyz[:, 1])
        np.testing.assert_allclose(after, before, atol=1e-9)
        np.testing.assert_array_equal(out.xyz[:, 2], cloud.xyz[:, 2])

    def test_composition_inverse(self):
        rng = np.random.default_rng(4)
        cloud, boxes = scene(rng)
        for alpha in rng.uniform(-math.pi, math.pi, 10):
            c1, b1 = rotate_scene(cloud, boxes, alpha)
            c2, b2 = rotate_scene(c1, b1, -alpha)
            np.testing.assert_allclose(c2.xyz, cloud.xyz, atol=1e-9)
            for orig, back in zip(boxes, b2):
                assert abs(orig.x_c - back.x_c) < 1e-9
                assert abs(orig.y_c - back.y_c) < 1e-9

    def test_box_corners_match_point_transform(self):
        rng = np.random.default_rng(5)
        _, boxes = scene(rng)
        angle = 0.21
        _, rotated = rotate_scene(PointCloud(np.empty((0, 3)), np.empty(0)),
                                  boxes, angle)
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        for orig, r in zip(boxes, rotated):
            expected = orig.corners() @ rot.T
            got = r.corners()
            assert {tuple(np.round(p, 9)) for p in expected} == \
                   {tuple(np.round(p, 9)) for p in got}

    def test_pairwise_iou_invariant(self):
        rng = np.random.default_rng(6)
        _, boxes = scene(rng, n_boxes=6)
        _, rotated = rotate_scene(PointCloud(np.empty((0, 3)), np.empty(0)),
                                  boxes, -0.8)
        _, flipped = flip_x(PointCloud(np.empty((0, 3)), np.empty(0)), boxes)
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                base = rotated_iou(boxes[i], boxes[j])
                assert rotated_iou(rotated[i], rotated[j]) == pytest.approx(base, abs=1e-9)
                assert rotated_iou(flipped[i], flipped[j]) == pytest.approx(base, abs=1e-9)


class TestAugmentSample:
    def test_degenerate_config_is_identity(self):
        rng = np.random.default_rng(7)
        cloud, boxes = scene(rng)
        cfg = AugmentConfig(flip_probability=0.0, rotation_range=0.0, seed=1)
        out, out_boxes, applied = augment_sample(cloud, boxes, cfg, 5)
        np.testing.assert_array_equal(out.xyz, cloud.xyz)
        assert applied == {"flipped": False, "angle": 0.0}

    def test_seeded_determinism(self):
        rng = np.random.default_rng(8)
        cloud, boxes = scene(rng)
        cfg = AugmentConfig(seed=42)
        a_cloud, a_boxes, a_applied = augment_sample(cloud, boxes, cfg, 3)
        b_cloud, b_boxes, b_applied = augment_sample(cloud, boxes, cfg, 3)
        assert a_cloud.xyz.tobytes() == b_cloud.xyz.tobytes()
        assert a_applied == b_applied
        assert a_boxes == b_boxes

    def test_draw_index_changes_transform(self):
        rng = np.random.default_rng(9)
        cloud, boxes = scene(rng)
        cfg = AugmentConfig(seed=42)
        angles = {augment_sample(cloud, boxes, cfg, i)[2]["angle"] for i in range(8)}
        assert len(angles) > 1

    def test_angle_bounds_and_uniformity(self):
        cfg = AugmentConfig(seed=7)
        cloud = PointCloud(np.empty((0, 3)), np.empty(0))
        n = 20000
        angles = np.array([augment_sample(cloud, [], cfg, i)[2]["angle"]
                           for i in range(n)])
        limit = math.radians(15)
        assert np.all(np.abs(angles) <= limit)
        hist, _ = np.histogram(angles, bins=20, range=(-limit, limit))
        assert stats.chisquare(hist).pvalue > 0.01

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            AugmentConfig(rotation_range=-1.0)
        with pytest.raises(ValueError):
            AugmentConfig(flip_probability=1.5)
