"""Replay and verification engines shared by the CLI and the test suite.

``run_replay`` feeds scans into a framework and collects per-scan metrics;
``run_verify`` replays a framework and a dense reference grid side by side
(in the framework's internal axis frame, so both integrate bit-identical
rays) and checks scene-specific acceptance conditions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import OccState, ProbParams, ProjectionAxis, world_to_voxel_array
from .framework import MappingFramework
from .localgrid import Box
from .oracle import (
    CompareResult,
    OracleGrid,
    compare_states,
    mapping_space_voxels,
)
from .simgen import Scene, replay_records

METRICS_HEADER = (
    "tick,raycast_ms,boundary_update_ms,localgrid_update_ms,slid,"
    "skipped_points,boundary_voxels,columns,estimated_bytes"
)


def make_framework(
    params: ProbParams,
    axis: ProjectionAxis,
    local_size_m,
    slide_threshold: int = 1,
    table_size: int = 1 << 10,
    track_provenance: bool = False,
) -> MappingFramework:
    dims = tuple(max(1, round(s / params.resolution)) for s in local_size_m)
    return MappingFramework(
        params,
        axis=axis,
        local_dims=dims,
        slide_threshold=slide_threshold,
        table_size=table_size,
        track_provenance=track_provenance,
    )


def oracle_extent_for_scene(scene: Scene, params: ProbParams, axis: ProjectionAxis) -> Box:
    """Internal-frame voxel box covering the scene plus one sensing range."""
    margin = params.sensor_range + 2 * params.resolution
    lo_w = np.asarray(scene.extent.lo) - margin
    hi_w = np.asarray(scene.extent.hi) + margin
    lo_i = np.asarray(axis.to_internal(tuple(lo_w)))
    hi_i = np.asarray(axis.to_internal(tuple(hi_w)))
    d = params.resolution
    lo = tuple(int(math.floor(c / d)) - 1 for c in lo_i)
    hi = tuple(int(math.ceil(c / d)) + 2 for c in hi_i)
    return Box(lo, hi)


@dataclass
class ReplayResult:
    rows: list[str] = field(default_factory=list)  # CSV rows under METRICS_HEADER
    n_scans: int = 0
    boundary_counts: list[int] = field(default_factory=list)


def run_replay(
    framework: MappingFramework,
    records,
    with_oracle: OracleGrid | None = None,
    on_scan=None,
) -> ReplayResult:
    """Drive a framework (and optionally a reference grid) through records.

    ``records`` yields ``(tick, pose, points)`` in world frame. ``on_scan``
    is called as ``on_scan(tick)`` after each update (verification hooks).
    """
    axis = framework.axis
    result = ReplayResult()
    for tick, pose, points in records:
        stats = framework.map_update(pose, points)
        if with_oracle is not None:
            pose_i = np.asarray(axis.to_internal(np.asarray(pose, dtype=np.float64)))
            pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
            pts_i = axis.to_internal(pts) if pts.size else pts
            with_oracle.update(pose_i, pts_i)
        report = framework.global_map.memory_report()
        result.rows.append(
            f"{tick},{stats.raycast_s * 1e3:.3f},{stats.boundary_update_s * 1e3:.3f},"
            f"{stats.localgrid_update_s * 1e3:.3f},{int(stats.slid)},"
            f"{stats.skipped_points},{report['boundary_voxel_count']},"
            f"{report['column_count']},{report['estimated_bytes']}"
        )
        result.boundary_counts.append(report["boundary_voxel_count"])
        result.n_scans += 1
        if on_scan is not None:
            on_scan(tick)
    return result


def internal_origins(scene: Scene, axis: ProjectionAxis) -> np.ndarray:
    poses = np.asarray(scene.poses, dtype=np.float64).reshape(-1, 3)
    return axis.to_internal(poses)


def run_axis_tradeoff(
    scene: Scene,
    params: ProbParams,
    axes: tuple[ProjectionAxis, ProjectionAxis] = (ProjectionAxis.X, ProjectionAxis.Z),
    n_queries: int = 10_000,
    seed: int = 7,
):
    """Replay a scene under two projection axes and measure the tradeoff.

    Returns ``{axis: {"estimated_bytes": ..., "mean_column_voxels": ...}}``.
    Projecting along a larger-extent axis concentrates the same boundary
    voxels into fewer columns: less memory, more voxels per binary search.
    """
    out = {}
    for axis in axes:
        framework = make_framework(
            params, axis, scene.meta.get("local_size", (8.0, 8.0, 4.0))
        )
        run_replay(framework, replay_records(scene))
        framework.finalize()
        m = mapping_space_voxels(
            internal_origins(scene, axis), params.sensor_range, params.resolution
        )
        rng = np.random.default_rng(seed)
        sample = m[rng.choice(len(m), size=min(n_queries, len(m)), replace=False)]
        framework.global_map.reset_stats()
        framework.query_voxels(sample)
        out[axis] = {
            "estimated_bytes": framework.global_map.memory_report()["estimated_bytes"],
            "mean_column_voxels": framework.global_map.stats.mean_column_voxels(),
        }
    return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyReport:
    scene: str
    agreement: float
    compared: int
    mismatches: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [
            f"scene={self.scene} compared={self.compared} "
            f"agreement={self.agreement:.6f} mismatches={self.mismatches}"
        ]
        for c in self.checks:
            out.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        return out


def run_verify(
    scene: Scene,
    params: ProbParams,
    axis: ProjectionAxis = ProjectionAxis.Z,
    local_size_m=None,
    slide_threshold: int = 1,
    table_size: int = 1 << 10,
) -> tuple[VerifyReport, MappingFramework, OracleGrid, CompareResult]:
    """Replay a scene against the dense reference and run its checks."""
    local_size_m = local_size_m or scene.meta.get("local_size", (8.0, 8.0, 4.0))
    framework = make_framework(
        params, axis, local_size_m, slide_threshold, table_size,
        track_provenance=True,
    )
    oracle = OracleGrid(oracle_extent_for_scene(scene, params, axis), params)

    snapshots: dict[str, object] = {}
    vacate_tick = scene.meta.get("vacate_tick")
    moving_volume: np.ndarray | None = None
    if scene.moving is not None and vacate_tick is not None:
        mb = scene.moving.box_at(vacate_tick - 1)
        lo = world_to_voxel_array(np.asarray(mb.lo, dtype=np.float64)[None, :], params.resolution)[0]
        hi = world_to_voxel_array(np.asarray(mb.hi, dtype=np.float64)[None, :], params.resolution)[0]
        moving_volume = Box(tuple(lo), tuple(hi + 1)).voxel_coords()

    def on_scan(tick):
        if vacate_tick is not None and tick == vacate_tick - 1 and moving_volume is not None:
            snapshots["pre_vacate"] = framework.query_voxels(
                axis.to_internal(moving_volume)
            )

    run_replay(framework, replay_records(scene), with_oracle=oracle, on_scan=on_scan)

    origins = internal_origins(scene, axis)
    m_voxels = mapping_space_voxels(origins, params.sensor_range, params.resolution)
    comparison = compare_states(oracle, framework.query_voxels, m_voxels)

    report = VerifyReport(
        scene=scene.name,
        agreement=comparison.agreement,
        compared=comparison.total,
        mismatches=len(comparison.mismatches),
    )

    if scene.name == "corridor" or scene.name == "aniso":
        report.checks.append(
            CheckResult(
                "exact_agreement",
                comparison.agreement == 1.0,
                f"agreement {comparison.agreement:.6f} over {comparison.total} voxels (need 1.0)",
            )
        )
        report.checks.append(
            CheckResult(
                "no_reentry",
                len(framework.reentered) == 0,
                f"{len(framework.reentered)} re-entered voxels (need 0)",
            )
        )
        if scene.name == "aniso":
            tradeoff = run_axis_tradeoff(scene, params)
            x = tradeoff[ProjectionAxis.X]
            z = tradeoff[ProjectionAxis.Z]
            report.checks.append(
                CheckResult(
                    "largest_axis_projection_less_memory",
                    x["estimated_bytes"] < z["estimated_bytes"],
                    f"x-axis {x['estimated_bytes']}B < z-axis {z['estimated_bytes']}B",
                )
            )
            report.checks.append(
                CheckResult(
                    "largest_axis_projection_longer_columns",
                    x["mean_column_voxels"] > z["mean_column_voxels"],
                    f"boundary voxels per query: x-axis {x['mean_column_voxels']:.2f} "
                    f"> z-axis {z['mean_column_voxels']:.2f}",
                )
            )
    elif scene.name == "loop":
        report.checks.append(
            CheckResult(
                "agreement_99",
                comparison.agreement >= 0.99,
                f"agreement {comparison.agreement:.6f} over {comparison.total} voxels (need >= 0.99)",
            )
        )
        reentered = framework.reentered
        outside = [v for v, _, _ in comparison.mismatches if tuple(v) not in reentered]
        report.checks.append(
            CheckResult(
                "mismatches_reentered",
                len(outside) == 0,
                f"{len(comparison.mismatches)} mismatches, {len(outside)} outside the re-entered set (need 0)",
            )
        )
        report.checks.append(
            CheckResult(
                "has_reentry",
                len(reentered) > 0,
                f"{len(reentered)} voxels slid out and re-entered (need > 0)",
            )
        )
    elif scene.name == "dynamic":
        report.checks.append(
            CheckResult(
                "exact_agreement",
                comparison.agreement == 1.0,
                f"agreement {comparison.agreement:.6f} over {comparison.total} voxels (need 1.0)",
            )
        )
        pre = snapshots.get("pre_vacate")
        if pre is None or moving_volume is None:
            report.checks.append(CheckResult("dynamics", False, "missing pre-vacate snapshot"))
        else:
            was_occ = np.asarray(pre) == int(OccState.OCCUPIED)
            final = framework.query_voxels(axis.to_internal(moving_volume))
            freed = np.asarray(final)[was_occ] == int(OccState.FREE)
            report.checks.append(
                CheckResult(
                    "occupied_while_present",
                    int(was_occ.sum()) > 0,
                    f"{int(was_occ.sum())} obstacle voxels occupied before vacating (need > 0)",
                )
            )
            report.checks.append(
                CheckResult(
                    "freed_after_vacate",
                    bool(freed.all()) and len(freed) > 0,
                    f"{int(freed.sum())}/{len(freed)} formerly occupied voxels free at end (need all)",
                )
            )
    else:
        report.checks.append(
            CheckResult(
                "agreement_99",
                comparison.agreement >= 0.99,
                f"agreement {comparison.agreement:.6f} over {comparison.total} voxels",
            )
        )
    return report, framework, oracle, comparison
