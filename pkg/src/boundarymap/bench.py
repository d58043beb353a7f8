"""Benchmark the compiled ray-casting kernel against the pure-Python fallback.

Two workloads: the raw traversal kernel on one synthetic scan, and a short
end-to-end corridor replay routed through each backend. Results print as a
small table; the same numbers back the ``boundarymap bench`` subcommand.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._kernels import available_backends
from .core import ProbParams, ProjectionAxis
from .runner import make_framework
from .simgen import corridor_scene, replay_records


@dataclass
class BenchRow:
    backend: str
    workload: str
    seconds: float
    units: int
    unit_name: str

    def rate(self) -> float:
        return self.units / self.seconds if self.seconds else float("inf")


def kernel_workload(name: str, impl, reps: int = 5, n_rays: int = 2000,
                    seed: int = 3) -> BenchRow:
    rng = np.random.default_rng(seed)
    origin = np.zeros(3)
    dirs = rng.normal(size=(n_rays, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    points = dirs * rng.uniform(0.5, 6.0, size=(n_rays, 1))
    steps = 0
    t0 = time.perf_counter()
    for _ in range(reps):
        miss, hit, _ = impl.raycast_grid(
            origin, points, 0.1, 5.0, np.array([-100] * 3), np.array([100] * 3)
        )
        steps += len(miss) + len(hit)
    dt = time.perf_counter() - t0
    return BenchRow(name, "kernel", dt, steps, "voxel_steps")


def replay_workload(name: str, impl, n_scans: int = 40, seed: int = 3) -> BenchRow:
    scene = corridor_scene(length=20.0, n_scans=n_scans, seed=seed)
    params = ProbParams.from_probabilities(
        resolution=0.2, sensor_range=scene.sensor.max_range
    )
    framework = make_framework(params, ProjectionAxis.Z, scene.meta["local_size"])
    framework.kernel_backend = impl
    t0 = time.perf_counter()
    for tick, pose, points in replay_records(scene):
        framework.map_update(pose, points)
    dt = time.perf_counter() - t0
    return BenchRow(name, "replay", dt, n_scans, "scans")


def run_benchmarks(reps: int = 5, n_rays: int = 2000, replay_scans: int = 40) -> list[BenchRow]:
    rows = []
    for name, impl in sorted(available_backends().items()):
        rows.append(kernel_workload(name, impl, reps=reps, n_rays=n_rays))
        rows.append(replay_workload(name, impl, n_scans=replay_scans))
    return rows


def format_rows(rows: list[BenchRow]) -> list[str]:
    out = [f"{'backend':<10} {'workload':<8} {'seconds':>10} {'rate':>16}"]
    for r in rows:
        out.append(
            f"{r.backend:<10} {r.workload:<8} {r.seconds:>10.4f} "
            f"{r.rate():>10.1f} {r.unit_name}/s"
        )
    by_workload: dict[str, dict[str, float]] = {}
    for r in rows:
        by_workload.setdefault(r.workload, {})[r.backend] = r.seconds
    for workload, times in sorted(by_workload.items()):
        if "native" in times and "fallback" in times and times["native"] > 0:
            out.append(
                f"speedup[{workload}]: native is "
                f"{times['fallback'] / times['native']:.1f}x faster than fallback"
            )
    return out
