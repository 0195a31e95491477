"""KITTI file format I/O: velodyne scans, calibration, labels and detection results.

All geometry read from label/result files lives in the camera BEV frame
(x right, z forward); point clouds live in the velodyne sensor frame
(x forward, y left, z up).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .boxes import RotatedBox


class FormatError(ValueError):
    """Raised when an input file violates the expected KITTI layout."""


class MergedClass(str, Enum):
    CAR = "Car"
    PEDESTRIAN = "Pedestrian"
    CYCLIST = "Cyclist"
    TRUCK = "Truck"
    MISC = "Misc"
    TRAM = "Tram"


# Raw KITTI label tokens -> merged training classes. Vans merge into Car and
# sitting persons into Pedestrian; DontCare is kept out of the merged set.
RAW_TO_MERGED = {
    "Car": MergedClass.CAR,
    "Van": MergedClass.CAR,
    "Pedestrian": MergedClass.PEDESTRIAN,
    "Person_sitting": MergedClass.PEDESTRIAN,
    "Cyclist": MergedClass.CYCLIST,
    "Truck": MergedClass.TRUCK,
    "Misc": MergedClass.MISC,
    "Tram": MergedClass.TRAM,
}

DONT_CARE = "DontCare"


@dataclass(frozen=True)
class PointCloud:
    """3D points with reflectance intensity in the sensor frame."""

    xyz: np.ndarray        # (N, 3) float64, meters
    intensity: np.ndarray  # (N,) float64 in [0, 1]

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        inten = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
        if xyz.shape[0] != inten.shape[0]:
            raise ValueError("xyz and intensity length mismatch")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "intensity", inten)

    def __len__(self):
        return self.xyz.shape[0]

    def select(self, mask) -> "PointCloud":
        return PointCloud(self.xyz[mask], self.intensity[mask])


@dataclass(frozen=True)
class CalibrationSet:
    cam_projection: np.ndarray  # P2, (3, 4)
    rect_rotation: np.ndarray   # R0_rect, (3, 3)
    lidar_to_cam: np.ndarray    # Tr_velo_to_cam, (3, 4)
    image_size: tuple           # (width, height) pixels

    def __post_init__(self):
        P = np.asarray(self.cam_projection, dtype=np.float64).reshape(3, 4)
        R = np.asarray(self.rect_rotation, dtype=np.float64).reshape(3, 3)
        T = np.asarray(self.lidar_to_cam, dtype=np.float64).reshape(3, 4)
        for m in (P, R, T):
            if not np.all(np.isfinite(m)):
                raise ValueError("non-finite calibration matrix")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6):
            raise ValueError("rect_rotation is not orthonormal")
        object.__setattr__(self, "cam_projection", P)
        object.__setattr__(self, "rect_rotation", R)
        object.__setattr__(self, "lidar_to_cam", T)


@dataclass(frozen=True)
class GroundTruthLabel:
    raw_class: str            # one of RAW_TO_MERGED keys or "DontCare"
    merged_class: MergedClass | None  # None for DontCare
    truncation: float
    occlusion: int
    image_bbox: tuple         # (left, top, right, bottom) pixels
    box: RotatedBox | None    # BEV box in camera frame (x right, z forward); None for DontCare
    height: float             # box height, meters
    location: tuple = (0.0, 0.0, 0.0)  # full 3D center, rectified camera frame


@dataclass(frozen=True)
class DetectionRecord:
    cls: MergedClass
    box: RotatedBox
    score: float

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError("non-finite detection score")
        if self.box.length <= 0 or self.box.width <= 0:
            raise ValueError("non-positive box extents")


def read_point_cloud(path) -> PointCloud:
    """Read a velodyne .bin scan: packed little-endian float32 (x, y, z, intensity).

    Non-finite records are dropped (and counted in the returned cloud's length
    difference); a trailing partial record is a format error.
    """
    size = os.path.getsize(path)
    if size % 16 != 0:
        raise FormatError(f"{path}: truncated record at byte offset {size - size % 16}")
    raw = np.fromfile(path, dtype="<f4").reshape(-1, 4).astype(np.float64)
    finite = np.all(np.isfinite(raw), axis=1)
    raw = raw[finite]
    return PointCloud(raw[:, :3], np.clip(raw[:, 3], 0.0, 1.0))


def write_point_cloud(cloud: PointCloud, path) -> None:
    rec = np.empty((len(cloud), 4), dtype="<f4")
    rec[:, :3] = cloud.xyz
    rec[:, 3] = cloud.intensity
    rec.tofile(path)


def read_calibration(path, image_size=(1242, 375)) -> CalibrationSet:
    """Parse a KITTI calib text file (keys P2, R0_rect, Tr_velo_to_cam)."""
    values = {}
    with open(path) as f:
        for line in f:
            if ":" not in line:
                continue
            key, rest = line.split(":", 1)
            values[key.strip()] = np.array([float(tok) for tok in rest.split()])
    try:
        P2 = values["P2"].reshape(3, 4)
        R0 = values["R0_rect"].reshape(3, 3)
        Tr = values["Tr_velo_to_cam"].reshape(3, 4)
    except KeyError as e:
        raise FormatError(f"{path}: missing calibration key {e}") from None
    return CalibrationSet(P2, R0, Tr, tuple(image_size))


def project_to_image(points_xyz: np.ndarray, calib: CalibrationSet):
    """Project sensor-frame points to rectified image pixels.

    Returns (pixels (N,2), depth (N,)); depth is the rectified-camera z.
    """
    pts = np.asarray(points_xyz, dtype=np.float64).reshape(-1, 3)
    hom = np.hstack([pts, np.ones((pts.shape[0], 1))])
    cam = hom @ calib.lidar_to_cam.T          # (N, 3) camera frame
    rect = cam @ calib.rect_rotation.T        # (N, 3) rectified
    rect_h = np.hstack([rect, np.ones((rect.shape[0], 1))])
    img = rect_h @ calib.cam_projection.T     # (N, 3)
    depth = img[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = img[:, :2] / depth[:, None]
    return px, depth


def filter_camera_fov(cloud: PointCloud, calib: CalibrationSet) -> PointCloud:
    """Keep only points that project into the camera image with positive depth."""
    if len(cloud) == 0:
        return cloud
    px, depth = project_to_image(cloud.xyz, calib)
    w, h = calib.image_size
    keep = (
        (depth > 0)
        & (px[:, 0] >= 0) & (px[:, 0] < w)
        & (px[:, 1] >= 0) & (px[:, 1] < h)
    )
    return cloud.select(keep)


def _parse_label_box(fields):
    # fields: h w l x y z ry in camera frame; BEV plane is (x, z)
    h, w, l = (float(fields[0]), float(fields[1]), float(fields[2]))
    x, _, z = (float(fields[3]), float(fields[4]), float(fields[5]))
    ry = float(fields[6])
    return RotatedBox(x, z, l, w, -ry), h


def read_labels(path):
    """Parse a KITTI label file into GroundTruthLabels with merged classes.

    DontCare entries are preserved (merged_class None, box None) so the
    evaluator can use them for masking.
    """
    labels = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 15:
                raise FormatError(f"{path}:{lineno}: expected >= 15 fields, got {len(fields)}")
            token = fields[0]
            if token == DONT_CARE:
                labels.append(GroundTruthLabel(
                    raw_class=DONT_CARE, merged_class=None,
                    truncation=float(fields[1]), occlusion=int(float(fields[2])),
                    image_bbox=tuple(float(v) for v in fields[4:8]),
                    box=None, height=0.0))
                continue
            if token not in RAW_TO_MERGED:
                raise FormatError(f"{path}:{lineno}: unknown class token '{token}'")
            box, h = _parse_label_box(fields[8:15])
            labels.append(GroundTruthLabel(
                raw_class=token, merged_class=RAW_TO_MERGED[token],
                truncation=float(fields[1]), occlusion=int(float(fields[2])),
                image_bbox=tuple(float(v) for v in fields[4:8]),
                box=box, height=h,
                location=tuple(float(v) for v in fields[11:14])))
    return labels


def label_box_to_lidar(label: GroundTruthLabel, calib: CalibrationSet) -> RotatedBox:
    """Transform a label's BEV box from the camera frame into the lidar frame."""
    if label.box is None:
        raise ValueError("DontCare labels carry no box")
    rect = np.asarray(label.location, dtype=np.float64)
    cam = np.linalg.inv(calib.rect_rotation) @ rect
    T = np.eye(4)
    T[:3, :] = calib.lidar_to_cam
    lid = np.linalg.inv(T) @ np.append(cam, 1.0)
    # Camera BEV heading theta maps to lidar yaw theta - pi/2 under the
    # nominal (x_l, y_l) = (z_cam, -x_cam) axis alignment.
    return RotatedBox(lid[0], lid[1], label.box.length, label.box.width,
                      label.box.theta - np.pi / 2)


def read_detections(path):
    """Parse a KITTI result file (label format + trailing score)."""
    dets = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 16:
                raise FormatError(f"{path}:{lineno}: expected >= 16 fields, got {len(fields)}")
            token = fields[0]
            if token not in RAW_TO_MERGED:
                raise FormatError(f"{path}:{lineno}: unknown class token '{token}'")
            box, _ = _parse_label_box(fields[8:15])
            dets.append(DetectionRecord(RAW_TO_MERGED[token], box, float(fields[15])))
    return dets


def write_detections(dets, path) -> None:
    """Write KITTI result lines sorted by descending score.

    Fields without a BEV counterpart (alpha, image bbox, camera y, box height)
    are emitted as KITTI's conventional placeholders.
    """
    ordered = sorted(dets, key=lambda d: -d.score)
    with open(path, "w") as f:
        for d in ordered:
            b = d.box
            f.write(
                f"{d.cls.value} -1 -1 -10 "
                f"-1.00 -1.00 -1.00 -1.00 "
                f"-1.00 {b.width:.2f} {b.length:.2f} "
                f"{b.x_c:.2f} -1000.00 {b.y_c:.2f} {-b.theta:.2f} {d.score:.4f}\n"
            )
