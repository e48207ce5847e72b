#!/usr/bin/env python3
"""Benchmark the compiled ray-casting backend against the pure-Python
fallback: acceleration-structure build time and batched min/max casting
throughput on fixture meshes of increasing size.

Usage: python3 benchmarks/bench_raycast.py [--rays N] [--repeat R]
"""

import argparse
import time

import numpy as np

from hairfield.fixtures import icosphere, shell_cap_mesh
from hairfield.raycast import AccelIndex, HAVE_COMPILED, _fallback


def random_rays(mesh, count, seed=0):
    rng = np.random.default_rng(seed)
    center = mesh.vertices.mean(axis=0)
    radius = np.linalg.norm(mesh.vertices - center, axis=1).max()
    origins = center + rng.normal(size=(count, 3)) * radius * 1.5
    dirs = center + rng.normal(size=(count, 3)) * radius * 0.5 - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs


def bench(mesh, impl, origins, dirs, repeat):
    t0 = time.perf_counter()
    index = AccelIndex(mesh, impl=impl)
    build = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = index.cast_min_max(origins, dirs)
        best = min(best, time.perf_counter() - t0)
    return build, best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rays", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    meshes = [
        ("sphere-subdiv4", icosphere(4)),
        ("sphere-subdiv6", icosphere(6)),
        ("shell-subdiv6", shell_cap_mesh(6, 1.2, 1.5, 90.0)),
    ]
    backends = [("fallback", _fallback)]
    if HAVE_COMPILED:
        backends.insert(0, ("compiled", None))
    else:
        print("compiled backend unavailable; benchmarking fallback only\n")

    header = (f"{'mesh':<16} {'faces':>8} {'backend':<9} "
              f"{'build (ms)':>11} {'cast (ms)':>10} {'Mrays/s':>8}")
    print(header)
    print("-" * len(header))
    for name, mesh in meshes:
        origins, dirs = random_rays(mesh, args.rays)
        results = {}
        for label, impl in backends:
            build, cast, result = bench(mesh, impl, origins, dirs, args.repeat)
            results[label] = result
            print(f"{name:<16} {mesh.n_faces:>8} {label:<9} "
                  f"{build * 1e3:>11.1f} {cast * 1e3:>10.1f} "
                  f"{args.rays / cast / 1e6:>8.2f}")
        if len(results) == 2:
            same = np.array_equal(results["compiled"][0], results["fallback"][0])
            print(f"{'':<16} {'':>8} agreement: hit counts "
                  f"{'identical' if same else 'DIFFER'}")
    print(f"\n{args.rays} rays per batch, best of {args.repeat} runs")


if __name__ == "__main__":
    main()
