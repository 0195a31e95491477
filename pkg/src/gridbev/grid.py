"""Multi-layer BEV grid mapping: rasterization, decay rate, feature assembly.

Grid frame: the sensor sits at the midpoint of the rear edge, x pointing
forward across the grid (u in [0, extent_x]) and y lateral
(v = y + extent_y / 2 in [0, extent_y]). Cell (iu, iv) covers
[iu*cell, (iu+1)*cell) x [iv*cell, (iv+1)*cell).
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from PIL import Image

from .kitti import PointCloud
from .raycast import kernel as _default_kernel

MAGIC = b"GBGM"

# Fixed chunk count so the merge order (and thus every float sum) is
# independent of the worker count.
DEFAULT_CHUNKS = 8


class FeatureConfig(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F1_STAR = "F1*"


FEATURE_LAYERS = {
    FeatureConfig.F1: ("intensity_mean", "z_min", "z_max", "detections", "observations"),
    FeatureConfig.F2: ("intensity_mean", "z_min", "z_max", "decay_rate"),
    FeatureConfig.F3: ("intensity_mean", "detections", "observations"),
    FeatureConfig.F1_STAR: ("intensity_mean", "z_min", "z_max", "detections", "observations"),
}


@dataclass(frozen=True)
class GridConfig:
    extent: tuple = (60.0, 60.0)            # (x forward, y lateral) meters
    cell_size: float = 0.15
    sensor_origin: tuple = (0.0, 0.0, 0.0)  # sensor position in cloud frame

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        for e in self.extent:
            n = e / self.cell_size
            if abs(n - round(n)) > 1e-9:
                raise ValueError(f"extent {e} is not a multiple of cell_size {self.cell_size}")

    @property
    def nx(self) -> int:
        return int(round(self.extent[0] / self.cell_size))

    @property
    def ny(self) -> int:
        return int(round(self.extent[1] / self.cell_size))

    def to_grid_frame(self, xy) -> np.ndarray:
        """Sensor-frame planar coordinates -> grid-local (u, v)."""
        xy = np.asarray(xy, dtype=np.float64)
        out = np.empty_like(xy)
        out[..., 0] = xy[..., 0] - self.sensor_origin[0]
        out[..., 1] = xy[..., 1] - self.sensor_origin[1] + self.extent[1] / 2
        return out

    @property
    def origin_grid(self):
        """Sensor position in grid-local coordinates: rear-edge midpoint."""
        return 0.0, self.extent[1] / 2


def point_to_cell(cfg: GridConfig, p):
    """Cell index (iu, iv) of a sensor-frame point, or None if out of grid.

    Points exactly on the max edge belong to the last cell.
    """
    u, v = cfg.to_grid_frame(np.asarray(p, dtype=np.float64)[:2])
    if u < 0 or u > cfg.extent[0] or v < 0 or v > cfg.extent[1]:
        return None
    iu = min(int(u // cfg.cell_size), cfg.nx - 1)
    iv = min(int(v // cfg.cell_size), cfg.ny - 1)
    return iu, iv


@dataclass(frozen=True)
class RayTraversal:
    cell_indices: np.ndarray    # (M, 2) int64 (iu, iv)
    crossing_lengths: np.ndarray  # (M,) float64 meters
    end_inside: bool


def traverse_ray_slab(cfg: GridConfig, origin, end, kernel=None) -> RayTraversal:
    """Cells crossed by the segment origin->end (sensor frame), clipped to the grid."""
    k = kernel or _default_kernel
    o = cfg.to_grid_frame(np.asarray(origin, dtype=np.float64)[:2])
    e = cfg.to_grid_frame(np.asarray(end, dtype=np.float64)[:2])
    if o[0] == e[0] and o[1] == e[1]:
        raise ValueError("zero-length ray")
    iu, iv, d, end_inside = k.traverse_ray(
        o[0], o[1], e[0], e[1], cfg.nx, cfg.ny, cfg.cell_size)
    return RayTraversal(np.stack([iu, iv], axis=1), d, end_inside)


@dataclass
class AccumulatorRaster:
    """Per-cell accumulation of endpoint and ray-traversal evidence."""

    config: GridConfig
    detections: np.ndarray     # (nx, ny) int64
    observations: np.ndarray   # (nx, ny) int64, rays crossing the cell
    traversal_sum: np.ndarray  # (nx, ny) float64, meters traveled through cell
    intensity_sum: np.ndarray  # (nx, ny) float64
    z_min: np.ndarray          # (nx, ny) float64, +inf where no detection
    z_max: np.ndarray          # (nx, ny) float64, -inf where no detection


def accumulate_cloud(cfg: GridConfig, cloud: PointCloud, workers: int = 1,
                     n_chunks: int = DEFAULT_CHUNKS, kernel=None) -> AccumulatorRaster:
    """Cast one ray from the sensor origin to every point and accumulate.

    Work is split into a fixed number of contiguous ray chunks whose partial
    buffers are merged in chunk order, so the result is bit-identical for any
    worker count.
    """
    k = kernel or _default_kernel
    nx, ny = cfg.nx, cfg.ny
    ncell = nx * ny
    ou, ov = cfg.origin_grid

    def new_buffers():
        return (np.zeros(ncell, np.int64), np.zeros(ncell, np.int64),
                np.zeros(ncell, np.float64), np.zeros(ncell, np.float64),
                np.full(ncell, np.inf), np.full(ncell, -np.inf))

    n = len(cloud)
    if n == 0:
        det, obs, trav, isum, zmin, zmax = new_buffers()
    else:
        ends = np.ascontiguousarray(cfg.to_grid_frame(cloud.xyz[:, :2]))
        z = np.ascontiguousarray(cloud.xyz[:, 2])
        inten = np.ascontiguousarray(cloud.intensity)
        bounds = np.linspace(0, n, n_chunks + 1).astype(np.int64)

        def run_chunk(i):
            buf = new_buffers()
            lo, hi = bounds[i], bounds[i + 1]
            if hi > lo:
                k.accumulate_rays(ou, ov, ends[lo:hi], z[lo:hi], inten[lo:hi],
                                  nx, ny, cfg.cell_size, *buf)
            return buf

        if workers <= 1:
            parts = [run_chunk(i) for i in range(n_chunks)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(run_chunk, range(n_chunks)))

        det, obs, trav, isum, zmin, zmax = parts[0]
        for pdet, pobs, ptrav, pisum, pzmin, pzmax in parts[1:]:
            det += pdet
            obs += pobs
            trav += ptrav
            isum += pisum
            np.minimum(zmin, pzmin, out=zmin)
            np.maximum(zmax, pzmax, out=zmax)

    shape = (nx, ny)
    return AccumulatorRaster(cfg, det.reshape(shape), obs.reshape(shape),
                             trav.reshape(shape), isum.reshape(shape),
                             zmin.reshape(shape), zmax.reshape(shape))


def compute_decay_rate(acc: AccumulatorRaster) -> np.ndarray:
    """Detections per meter of ray traversal; 0 where nothing was traversed."""
    out = np.zeros_like(acc.traversal_sum)
    np.divide(acc.detections, acc.traversal_sum, out=out, where=acc.traversal_sum > 0)
    return out


@dataclass
class MultiLayerGridMap:
    config: GridConfig
    feature_config: FeatureConfig
    layers: dict            # name -> (nx, ny) float64, order matches FEATURE_LAYERS
    provenance: dict = field(default_factory=dict)

    @property
    def shape(self):
        first = next(iter(self.layers.values()))
        return first.shape

    def layer(self, name: str) -> np.ndarray:
        if name not in self.layers:
            raise KeyError(f"unknown layer '{name}'")
        return self.layers[name]


def assemble_features(acc: AccumulatorRaster, feature_config,
                      ground_removed: bool = False,
                      provenance: dict | None = None) -> MultiLayerGridMap:
    """Build the named feature layers for a configuration; empty cells carry 0."""
    fc = FeatureConfig(feature_config)
    if fc is FeatureConfig.F1_STAR and not ground_removed:
        raise ValueError("F1* requires an accumulator built from non-ground points")

    det = acc.detections
    has_det = det > 0
    intensity_mean = np.zeros_like(acc.intensity_sum)
    np.divide(acc.intensity_sum, det, out=intensity_mean, where=has_det)

    available = {
        "intensity_mean": lambda: intensity_mean,
        "z_min": lambda: np.where(has_det, acc.z_min, 0.0),
        "z_max": lambda: np.where(has_det, acc.z_max, 0.0),
        "detections": lambda: det.astype(np.float64),
        "observations": lambda: acc.observations.astype(np.float64),
        "decay_rate": lambda: compute_decay_rate(acc),
    }
    layers = {name: available[name]() for name in FEATURE_LAYERS[fc]}
    return MultiLayerGridMap(acc.config, fc, layers, dict(provenance or {}))


def write_grid_map(gmap: MultiLayerGridMap, path) -> None:
    """Grid container: magic, uint32 LE header length, JSON header, f32 planes."""
    header = {
        "format": "gridbev-grid",
        "version": 1,
        "extent": list(gmap.config.extent),
        "cell_size": gmap.config.cell_size,
        "sensor_origin": list(gmap.config.sensor_origin),
        "feature_config": gmap.feature_config.value,
        "layer_names": list(gmap.layers.keys()),
        "shape": list(gmap.shape),
        "provenance": gmap.provenance,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for arr in gmap.layers.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_grid_map(path) -> MultiLayerGridMap:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError(f"{path}: not a gridbev grid container")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen))
        nx, ny = header["shape"]
        cfg = GridConfig(tuple(header["extent"]), header["cell_size"],
                         tuple(header["sensor_origin"]))
        layers = {}
        for name in header["layer_names"]:
            plane = np.frombuffer(f.read(nx * ny * 4), dtype="<f4")
            layers[name] = plane.reshape(nx, ny).astype(np.float64)
    return MultiLayerGridMap(cfg, FeatureConfig(header["feature_config"]),
                             layers, header.get("provenance", {}))


def render_layer(gmap: MultiLayerGridMap, name: str, path) -> None:
    """Write one layer as a min-max normalized 16-bit grayscale PNG."""
    arr = gmap.layer(name)
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        norm = (arr - lo) / (hi - lo)
    else:
        norm = np.zeros_like(arr)
    img = np.round(norm * 65535.0).astype(np.uint16)
    Image.fromarray(img).save(path)
