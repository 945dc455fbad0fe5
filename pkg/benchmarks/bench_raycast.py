#!/usr/bin/env python3
"""Benchmark the ray-cast backends (compiled vs numpy) on scenario workloads.

Usage: python benchmarks/bench_raycast.py [--repeats N]
"""

import argparse
import time

import numpy as np

from viloop._kernels import available_backends
from viloop.frames import RigidTransform, compose
from viloop.scenario import bundled_scenario_path, load_scenario
from viloop.sensors import _camera_directions, _lidar_directions, scene_primitives
from viloop.world import reset_scene


def bench(fn, origin, dirs, prims, max_range, rot, repeats):
    fn(origin, dirs, *prims, max_range, rot=rot)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(origin, dirs, *prims, max_range, rot=rot)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    bundle = load_scenario(bundled_scenario_path("corridor"))
    scene, pose = reset_scene(bundle.scene, 7)
    prims = scene_primitives(scene)
    sensor = compose(pose, bundle.lidar_cfg.mount)
    origin = sensor.translation.reshape(1, 3)

    workloads = {
        "lidar 31x360": (_lidar_directions(360, 30, 1, 1), 30.0),
        "camera 640x480": (_camera_directions(640, 480, 90.0), 50.0),
        "camera 160x120": (_camera_directions(160, 120, 90.0), 50.0),
    }

    backends = available_backends()
    print(f"backends: {', '.join(sorted(backends))}   "
          f"scene: {len(scene.obstacles)} obstacles")
    print(f"{'workload':<16} {'rays':>8} " +
          " ".join(f"{name:>12}" for name in sorted(backends)) +
          ("   speedup" if len(backends) > 1 else ""))
    reference = {}
    for label, (dirs, max_range) in workloads.items():
        cells = []
        times = {}
        for name in sorted(backends):
            dt = bench(backends[name], origin, dirs, prims, max_range,
                       sensor.rotation, args.repeats)
            times[name] = dt
            cells.append(f"{dt * 1e3:>9.2f} ms")
        line = f"{label:<16} {len(dirs):>8} " + " ".join(cells)
        if "compiled" in times and "python" in times:
            line += f"   {times['python'] / times['compiled']:>6.1f}x"
        print(line)
        reference[label] = times

    # sanity: identical outputs across backends
    if len(backends) > 1:
        dirs, max_range = workloads["camera 160x120"]
        outs = {name: fn(origin, dirs, *prims, max_range, rot=sensor.rotation)
                for name, fn in backends.items()}
        (t0, v0), (t1, v1) = outs.values()
        agree = np.array_equal(t0, t1) and np.array_equal(v0, v1)
        print(f"bit-identical outputs: {agree}")


if __name__ == "__main__":
    main()
