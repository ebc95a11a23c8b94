"""Compare the compiled geometry kernels against the numpy fallback.

Runs the three hot paths (scalar occlusion tests, batched occlusion scans,
and full reflection traces plus a tile configure pass) on the default
hallway scene under each available backend and reports best-of-N wall
times with the speedup of compiled over pure.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--scale K]
"""

import argparse
import time

import numpy as np

from thzreach import kernels
from thzreach.geometry import build_e_hallway, is_occluded, points_occluded_from
from thzreach.raytracer import trace_reflections
from thzreach.tiles import TileKind, TileSet, configure, uniform_tile_grid


def build_workloads(scale):
    scene, endpoints = build_e_hallway()
    rng = np.random.default_rng(42)
    lo = np.array([0.5, 0.2, 0.2])
    hi = np.array([99.5, 6.3, 2.8])
    seg_a = rng.uniform(lo, hi, (400 * scale, 3))
    seg_b = rng.uniform(lo, hi, (400 * scale, 3))
    targets = rng.uniform(lo, hi, (4000 * scale, 3))
    tiles = TileSet(TileKind.HYPERSURFACE, uniform_tile_grid(scene, (1,), 0.5))
    rx_nlos = next(r for r in endpoints.rx if r.rx_id == 10)

    def occlusion_scalar():
        hits = 0
        for a, b in zip(seg_a, seg_b):
            hits += is_occluded(a, b, scene)
        return hits

    def occlusion_batched():
        total = 0
        for _ in range(10 * scale):
            total += int(points_occluded_from(endpoints.tx, targets, scene).sum())
        return total

    def full_trace():
        n = 0
        for rx in endpoints.rx:
            n += len(trace_reflections(scene, endpoints.tx, rx.position, 2))
        return n

    def tile_configure():
        return len(configure(tiles, scene, endpoints.tx, rx_nlos.position))

    return [
        ("occlusion scalar", occlusion_scalar),
        ("occlusion batched", occlusion_batched),
        ("full trace x15", full_trace),
        ("tile configure", tile_configure),
    ]


def best_of(fn, repeat):
    best = float("inf")
    value = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="best-of repetitions per cell")
    ap.add_argument("--scale", type=int, default=1, help="workload size multiplier")
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {kernels.active_backend()})")
    workloads = build_workloads(args.scale)

    times = {}
    checks = {}
    for name in backends:
        kernels.select(name)
        for label, fn in workloads:
            t, v = best_of(fn, args.repeat)
            times[(name, label)] = t
            checks.setdefault(label, set()).add(v)

    header = f"{'workload':<20}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for label, _ in workloads:
        row = f"{label:<20}"
        for b in backends:
            row += f"{times[(b, label)] * 1e3:>10.2f}ms"
        if len(backends) > 1:
            row += f"{times[('pure', label)] / times[('compiled', label)]:>9.1f}x"
        print(row)

    bad = [label for label, vals in checks.items() if len(vals) != 1]
    if bad:
        raise SystemExit(f"backend results disagree for: {', '.join(bad)}")
    print("all backends produced identical results")


if __name__ == "__main__":
    main()
