"""Compare the compiled and pure-Python ray-casting backends.

Usage: python benchmarks/bench_raycast.py [--points N] [--repeats R] [--workers W]

Rasterizes the same synthetic scan with both kernels, reports wall time per
backend, and verifies the accumulators are bit-identical.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from conftest import synthetic_scan  # noqa: E402

from gridbev import _raycast_py  # noqa: E402
from gridbev.grid import GridConfig, accumulate_cloud  # noqa: E402
from gridbev.raycast import backend_name, kernel  # noqa: E402


def time_backend(cfg, cloud, k, workers, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = accumulate_cloud(cfg, cloud, workers=workers, kernel=k)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=120_000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = GridConfig()
    cloud = synthetic_scan(np.random.default_rng(args.seed), args.points)
    print(f"scan: {args.points} points, grid {cfg.nx}x{cfg.ny} at "
          f"{cfg.cell_size} m, workers={args.workers}, best of {args.repeats}")
    print(f"active backend: {backend_name()}")

    backends = [("pure-python", _raycast_py)]
    if kernel.IS_COMPILED:
        backends.insert(0, ("compiled", kernel))
    else:
        print("compiled backend unavailable; timing the fallback only")

    results = {}
    for name, k in backends:
        elapsed, acc = time_backend(cfg, cloud, k, args.workers, args.repeats)
        results[name] = acc
        rate = args.points / elapsed / 1e6
        print(f"{name:<12} {elapsed * 1e3:9.1f} ms   {rate:6.2f} M rays/s")

    if len(results) == 2:
        a, b = results["compiled"], results["pure-python"]
        identical = (np.array_equal(a.detections, b.detections)
                     and np.array_equal(a.observations, b.observations)
                     and np.array_equal(a.traversal_sum, b.traversal_sum)
                     and np.array_equal(a.intensity_sum, b.intensity_sum)
                     and np.array_equal(a.z_min, b.z_min)
                     and np.array_equal(a.z_max, b.z_max))
        print(f"bit-identical accumulators: {identical}")
        return 0 if identical else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
