"""Command line surface: rasterize, ground, augment, encode-check, evaluate, bench."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import augment as aug
from . import evaluation as ev
from . import grid as gm
from . import ground as gnd
from . import kitti
from .boxes import BoxEncoding, EncodedBox, RotatedBox, decode, encode
from .config import ConfigError, load_pipeline_config
from .raycast import backend_name


def _common_config(args):
    overrides = {
        "cell_size": getattr(args, "cell_size", None),
        "feature_config": getattr(args, "feature_config", None),
        "box_encoding": getattr(args, "box_encoding", None),
        "ap_mode": getattr(args, "ap_mode", None),
        "seed": getattr(args, "seed", None),
    }
    return load_pipeline_config(getattr(args, "config", None), overrides)


def _rasterize_one(scan_path: Path, cfg, calib_dir, ground_removal, out_dir: Path,
                   render: bool, timing: bool):
    t0 = time.perf_counter()
    cloud = kitti.read_point_cloud(scan_path)
    if calib_dir is not None:
        calib_path = Path(calib_dir) / f"{scan_path.stem}.txt"
        calib = kitti.read_calibration(calib_path)
        cloud = kitti.filter_camera_fov(cloud, calib)
    provenance = {"scan": scan_path.name, "backend": backend_name()}
    if ground_removal:
        plane = gnd.fit_ground_plane(cloud, cfg.ground)
        _, cloud = gnd.split_ground(cloud, plane, cfg.ground)
        provenance["ground_plane"] = {
            "normal": plane.normal.tolist(), "offset": plane.offset}
    acc = gm.accumulate_cloud(cfg.grid, cloud)
    gmap = gm.assemble_features(acc, cfg.feature_config,
                               ground_removed=ground_removal,
                               provenance=provenance)
    out = out_dir / f"{scan_path.stem}.grid"
    gm.write_grid_map(gmap, out)
    if render:
        for name in gmap.layers:
            gm.render_layer(gmap, name, out_dir / f"{scan_path.stem}_{name}.png")
    if timing:
        print(f"{scan_path.name}: {1e3 * (time.perf_counter() - t0):.1f} ms")
    return out


def cmd_rasterize(args) -> int:
    cfg = _common_config(args)
    if cfg.feature_config is gm.FeatureConfig.F1_STAR and not args.ground_removal:
        raise ConfigError("feature config F1* requires --ground-removal")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scans = [Path(p) for p in args.scans]

    failures = []

    def work(p):
        try:
            _rasterize_one(p, cfg, args.calib_dir, args.ground_removal, out_dir,
                           args.render, args.timing)
        except Exception as e:
            failures.append((p, e))

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            list(pool.map(work, scans))
    else:
        for p in scans:
            work(p)
    for p, e in failures:
        print(f"error: {p}: {e}", file=sys.stderr)
    return 1 if failures else 0


def cmd_ground(args) -> int:
    cfg = _common_config(args)
    cloud = kitti.read_point_cloud(args.scan)
    plane = gnd.fit_ground_plane(cloud, cfg.ground)
    ground, non_ground = gnd.split_ground(cloud, plane, cfg.ground)
    print(json.dumps({
        "normal": plane.normal.tolist(),
        "offset": plane.offset,
        "points": len(cloud),
        "ground": len(ground),
        "non_ground": len(non_ground),
    }, indent=2))
    return 0


def cmd_augment(args) -> int:
    cfg = _common_config(args)
    cloud = kitti.read_point_cloud(args.scan)
    boxes = []
    if args.labels:
        if not args.calib:
            raise ConfigError("--labels requires --calib to map boxes into the lidar frame")
        calib = kitti.read_calibration(args.calib)
        boxes = [kitti.label_box_to_lidar(l, calib)
                 for l in kitti.read_labels(args.labels) if l.box is not None]
    out_cloud, out_boxes, applied = aug.augment_sample(
        cloud, boxes, cfg.augment, args.draw_index)
    out = Path(args.out) if args.out else Path(args.scan).with_suffix(".aug.bin")
    kitti.write_point_cloud(out_cloud, out)
    report = {"applied": applied, "output": str(out)}
    if out_boxes:
        report["boxes"] = [[b.x_c, b.y_c, b.length, b.width, b.theta] for b in out_boxes]
    print(json.dumps(report, indent=2))
    return 0


def cmd_encode_check(args) -> int:
    cfg = _common_config(args)
    enc = BoxEncoding(cfg.box_encoding)
    rng = np.random.default_rng(args.seed or 0)
    worst_center = worst_extent = worst_theta = 0.0
    for _ in range(args.samples):
        box = RotatedBox(rng.uniform(-30, 30), rng.uniform(-30, 30),
                         rng.uniform(0.3, 25.0), rng.uniform(0.3, 4.0),
                         rng.uniform(-math.pi, math.pi))
        back = decode(encode(box, enc))
        worst_center = max(worst_center, abs(back.x_c - box.x_c), abs(back.y_c - box.y_c))
        worst_extent = max(worst_extent, abs(back.length - box.length),
                           abs(back.width - box.width))
        dt = abs(back.theta - box.theta) % math.pi
        worst_theta = max(worst_theta, min(dt, math.pi - dt))
    ok = worst_center < 1e-9 and worst_extent < 1e-9 and worst_theta < 1e-9
    print(json.dumps({"encoding": enc.value, "samples": args.samples,
                      "max_center_err": worst_center, "max_extent_err": worst_extent,
                      "max_heading_err": worst_theta, "ok": ok}, indent=2))
    return 0 if ok else 1


def _load_frame_dir(path, reader):
    return {p.stem: reader(p) for p in sorted(Path(path).glob("*.txt"))}


def cmd_evaluate(args) -> int:
    cfg = _common_config(args)
    gts = _load_frame_dir(args.gt_dir, kitti.read_labels)
    dets = _load_frame_dir(args.det_dir, kitti.read_detections)
    if not gts:
        print(f"error: no ground truth files in {args.gt_dir}", file=sys.stderr)
        return 1
    if dets and set(dets) != set(gts):
        missing = sorted(set(gts) ^ set(dets))
        print(f"error: frame mismatch between gt and detections: {missing}",
              file=sys.stderr)
        return 1
    results = ev.evaluate_dataset(gts, dets, iou_thresholds=cfg.iou_thresholds,
                                  mode=cfg.ap_mode,
                                  dontcare_masking=args.dontcare_masking)
    print(ev.format_ap_table(results))
    if args.json:
        payload = [{"class": r.cls.value, "difficulty": r.difficulty.value,
                    "ap": r.ap, "iou_threshold": r.iou_threshold, "mode": r.mode}
                   for r in results]
        Path(args.json).write_text(json.dumps(payload, indent=2))
    return 0


BENCH_STAGES = ("read", "fov_filter", "ground_fit", "ray_cast", "assemble")


def cmd_bench(args) -> int:
    cfg = _common_config(args)
    times = {s: [] for s in BENCH_STAGES}
    for path in args.scans:
        path = Path(path)
        t = time.perf_counter()
        cloud = kitti.read_point_cloud(path)
        times["read"].append(time.perf_counter() - t)

        t = time.perf_counter()
        if args.calib_dir:
            calib = kitti.read_calibration(Path(args.calib_dir) / f"{path.stem}.txt")
            cloud = kitti.filter_camera_fov(cloud, calib)
        times["fov_filter"].append(time.perf_counter() - t)

        t = time.perf_counter()
        plane = gnd.fit_ground_plane(cloud, cfg.ground)
        times["ground_fit"].append(time.perf_counter() - t)

        t = time.perf_counter()
        acc = gm.accumulate_cloud(cfg.grid, cloud, workers=args.threads)
        times["ray_cast"].append(time.perf_counter() - t)

        t = time.perf_counter()
        gm.assemble_features(acc, cfg.feature_config,
                             ground_removed=cfg.feature_config is gm.FeatureConfig.F1_STAR)
        times["assemble"].append(time.perf_counter() - t)
        del plane

    print(f"backend: {backend_name()}  threads: {args.threads}  scans: {len(args.scans)}")
    print(f"{'stage':<12}{'median ms':>12}{'p95 ms':>12}")
    for stage in BENCH_STAGES:
        v = np.array(times[stage]) * 1e3
        print(f"{stage:<12}{np.median(v):>12.2f}{np.percentile(v, 95):>12.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridbev",
                                     description="BEV grid map pipeline for LiDAR scans")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="declarative YAML config file")
        p.add_argument("--cell-size", type=float, choices=[0.10, 0.15], dest="cell_size")
        p.add_argument("--feature-config", choices=["F1", "F2", "F3", "F1*"],
                       dest="feature_config")
        p.add_argument("--box-encoding", choices=["B1", "B2", "B3"], dest="box_encoding")
        p.add_argument("--ap-mode", type=int, choices=[11, 40], dest="ap_mode")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("rasterize", help="rasterize scans into grid containers")
    add_common(p)
    p.add_argument("scans", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--calib-dir", dest="calib_dir")
    p.add_argument("--ground-removal", action="store_true", dest="ground_removal")
    p.add_argument("--render", action="store_true")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("ground", help="fit and report the ground plane of a scan")
    add_common(p)
    p.add_argument("scan")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("augment", help="apply a seeded flip/rotation to a scan")
    add_common(p)
    p.add_argument("scan")
    p.add_argument("--labels")
    p.add_argument("--calib")
    p.add_argument("--draw-index", type=int, default=0, dest="draw_index")
    p.add_argument("--out")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("encode-check", help="round-trip check a box encoding")
    add_common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_encode_check)

    p = sub.add_parser("evaluate", help="KITTI BEV AP over gt/detection dirs")
    add_common(p)
    p.add_argument("--gt-dir", required=True, dest="gt_dir")
    p.add_argument("--det-dir", required=True, dest="det_dir")
    p.add_argument("--json", help="write machine-readable results here")
    p.add_argument("--dontcare-masking", action="store_true", dest="dontcare_masking")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="per-stage throughput report")
    add_common(p)
    p.add_argument("scans", nargs="+")
    p.add_argument("--calib-dir", dest="calib_dir")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, kitti.FormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
