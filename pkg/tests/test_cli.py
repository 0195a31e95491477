import json

import numpy as np
import pytest

from conftest import synthetic_scan
from gridbev import evaluation as ev
from gridbev import kitti
from gridbev.boxes import RotatedBox
from gridbev.cli import BENCH_STAGES, main
from gridbev.grid import read_grid_map


@pytest.fixture
def scan_file(tmp_path):
    rng = np.random.default_rng(0)
    cloud = synthetic_scan(rng, 4000)
    path = tmp_path / "000000.bin"
    kitti.write_point_cloud(cloud, path)
    return path


GT_LINE = ("Car 0.00 0 1.55 300.00 150.00 400.00 220.00 "
           "1.50 1.80 4.00 {x:.2f} 1.65 {z:.2f} {ry:.2f}\n")


def write_gt(path, cars):
    path.write_text("".join(GT_LINE.format(x=x, z=z, ry=ry) for x, z, ry in cars))


class TestRasterize:
    def test_f2_container(self, tmp_path, scan_file, capsys):
        out = tmp_path / "out"
        rc = main(["rasterize", str(scan_file), "--out", str(out),
                   "--feature-config", "F2", "--cell-size", "0.15"])
        assert rc == 0
        gmap = read_grid_map(out / "000000.grid")
        assert len(gmap.layers) == 4
        for arr in gmap.layers.values():
            assert arr.shape == (400, 400)

    def test_f1_star_requires_ground_removal(self, tmp_path, scan_file, capsys):
        rc = main(["rasterize", str(scan_file), "--out", str(tmp_path / "o"),
                   "--feature-config", "F1*"])
        assert rc == 2
        assert "F1*" in capsys.readouterr().err

    def test_f1_star_with_ground_removal(self, tmp_path, scan_file):
        out = tmp_path / "out"
        rc = main(["rasterize", str(scan_file), "--out", str(out),
                   "--feature-config", "F1*", "--ground-removal"])
        assert rc == 0
        assert len(read_grid_map(out / "000000.grid").layers) == 5

    def test_batch_matches_single(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        paths = []
        for i in range(3):
            p = tmp_path / f"{i:06d}.bin"
            kitti.write_point_cloud(synthetic_scan(rng, 2000), p)
            paths.append(p)
        batch, single = tmp_path / "batch", tmp_path / "single"
        assert main(["rasterize", *map(str, paths), "--out", str(batch),
                     "--threads", "2"]) == 0
        for p in paths:
            assert main(["rasterize", str(p), "--out", str(single)]) == 0
        for p in paths:
            a = read_grid_map(batch / f"{p.stem}.grid")
            b = read_grid_map(single / f"{p.stem}.grid")
            for name in a.layers:
                np.testing.assert_array_equal(a.layer(name), b.layer(name))

    def test_missing_scan_reports_and_fails(self, tmp_path, capsys):
        rc = main(["rasterize", str(tmp_path / "nope.bin"),
                   "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "nope.bin" in capsys.readouterr().err

    def test_render_writes_pngs(self, tmp_path, scan_file):
        out = tmp_path / "out"
        rc = main(["rasterize", str(scan_file), "--out", str(out),
                   "--feature-config", "F3", "--render"])
        assert rc == 0
        assert len(list(out.glob("*.png"))) == 3


class TestGroundAndAugment:
    def test_ground_report(self, scan_file, capsys):
        assert main(["ground", str(scan_file)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["ground"] + report["non_ground"] == report["points"]
        # synthetic plane sits at z = -1.7 with upward normal
        assert report["normal"][2] > 0.99
        assert abs(-report["offset"] / report["normal"][2] + 1.7) < 0.05

    def test_augment_deterministic(self, tmp_path, scan_file, capsys):
        outs = []
        for name in ("a.bin", "b.bin"):
            rc = main(["augment", str(scan_file), "--seed", "5",
                       "--draw-index", "3", "--out", str(tmp_path / name)])
            assert rc == 0
            outs.append((tmp_path / name).read_bytes())
            json.loads(capsys.readouterr().out)
        assert outs[0] == outs[1]


class TestEncodeCheck:
    @pytest.mark.parametrize("enc", ["B1", "B2", "B3"])
    def test_round_trip_ok(self, enc, capsys):
        rc = main(["encode-check", "--box-encoding", enc, "--samples", "300"])
        report = json.loads(capsys.readouterr().out)
        assert rc == 0 and report["ok"]
        assert report["encoding"] == enc


class TestEvaluate:
    def _dirs(self, tmp_path, cars_by_frame):
        gt_dir = tmp_path / "gt"
        det_dir = tmp_path / "det"
        gt_dir.mkdir()
        det_dir.mkdir()
        for frame, cars in cars_by_frame.items():
            write_gt(gt_dir / f"{frame}.txt", cars)
            dets = [kitti.DetectionRecord(l.merged_class, l.box, 0.9 - 0.1 * i)
                    for i, l in enumerate(kitti.read_labels(gt_dir / f"{frame}.txt"))]
            kitti.write_detections(dets, det_dir / f"{frame}.txt")
        return gt_dir, det_dir

    def test_gt_as_detections_scores_100(self, tmp_path, capsys):
        cars = {"000000": [(2.0, 12.0, 0.3), (-4.0, 20.0, -0.7)],
                "000001": [(1.0, 9.0, 1.0)]}
        gt_dir, det_dir = self._dirs(tmp_path, cars)
        out_json = tmp_path / "ap.json"
        rc = main(["evaluate", "--gt-dir", str(gt_dir), "--det-dir", str(det_dir),
                   "--json", str(out_json)])
        assert rc == 0
        results = json.loads(out_json.read_text())
        for r in results:
            if r["class"] == "Car":
                assert r["ap"] == pytest.approx(100.0)

    def test_empty_det_dir_scores_zero(self, tmp_path, capsys):
        gt_dir, det_dir = self._dirs(tmp_path, {"000000": [(2.0, 12.0, 0.3)]})
        for p in det_dir.glob("*.txt"):
            p.unlink()
        out_json = tmp_path / "ap.json"
        rc = main(["evaluate", "--gt-dir", str(gt_dir), "--det-dir", str(det_dir),
                   "--json", str(out_json)])
        assert rc == 0
        for r in json.loads(out_json.read_text()):
            if r["class"] == "Car":
                assert r["ap"] == 0.0

    def test_partial_frame_mismatch_errors(self, tmp_path, capsys):
        cars = {"000000": [(2.0, 12.0, 0.3)], "000001": [(1.0, 9.0, 1.0)]}
        gt_dir, det_dir = self._dirs(tmp_path, cars)
        (det_dir / "000001.txt").unlink()
        rc = main(["evaluate", "--gt-dir", str(gt_dir), "--det-dir", str(det_dir)])
        assert rc == 1
        assert "000001" in capsys.readouterr().err

    def test_cli_matches_library(self, tmp_path, capsys):
        cars = {"000000": [(2.0, 12.0, 0.3), (-4.0, 20.0, -0.7)]}
        gt_dir, det_dir = self._dirs(tmp_path, cars)
        # perturb one detection into a false positive
        dets = kitti.read_detections(det_dir / "000000.txt")
        bad = kitti.DetectionRecord(kitti.MergedClass.CAR,
                                    RotatedBox(25.0, 40.0, 4.0, 1.8, 0.0), 0.95)
        kitti.write_detections(dets + [bad], det_dir / "000000.txt")
        out_json = tmp_path / "ap.json"
        assert main(["evaluate", "--gt-dir", str(gt_dir),
                     "--det-dir", str(det_dir), "--json", str(out_json)]) == 0
        cli_results = {(r["class"], r["difficulty"]): r["ap"]
                       for r in json.loads(out_json.read_text())}
        lib = ev.evaluate_dataset(
            {"000000": kitti.read_labels(gt_dir / "000000.txt")},
            {"000000": kitti.read_detections(det_dir / "000000.txt")})
        for r in lib:
            got = cli_results[(r.cls.value, r.difficulty.value)]
            if np.isnan(r.ap):
                assert got is None or np.isnan(got)
            else:
                assert got == pytest.approx(r.ap)


class TestBench:
    def test_lists_all_stages(self, scan_file, capsys):
        assert main(["bench", str(scan_file)]) == 0
        out = capsys.readouterr().out
        for stage in BENCH_STAGES:
            assert stage in out
        assert "backend:" in out
