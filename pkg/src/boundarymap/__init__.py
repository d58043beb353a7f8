"""Memory-efficient 3D occupancy mapping via boundary voxels.

The global map stores only the boundary between free space and everything
else: occupied voxels, free voxels touching non-free space, and unknown
voxels touching free space. Boundary voxels collapse along a projection axis
into sorted columns of packed 32-bit words inside a hashed 2D grid, which
answers free/occupied/unknown queries for arbitrary 3D locations in
amortized constant time. A robot-centric dense local grid absorbs scans in
real time and synchronizes with the global map as it slides.
"""
from ._kernels import BACKEND_NAME as kernel_backend_name
from .boundary import (
    BoundaryGrid2D,
    BoundaryType,
    analytic_voxel_estimate,
    hash_cell,
    pack,
    unpack,
)
from .core import (
    InvalidInputError,
    LogicError,
    OccState,
    ProbParams,
    ProjectionAxis,
    VoxelIndex,
    WorldPoint,
    clamp_logodds,
    logodds_to_prob,
    prob_to_logodds,
    state_from_logodds,
    world_to_voxel,
)
from .framework import MappingFramework, compute_boundary_voxel_status
from .localgrid import Box, LocalGrid, SlideRegions, compute_slide_regions
from .oracle import OracleGrid, compare_states, mapping_space_voxels
from .simgen import Scene, SensorSpec, builtin_scenes, make_scene, simulate_scan

__version__ = "0.1.0"

__all__ = [
    "BoundaryGrid2D",
    "BoundaryType",
    "Box",
    "InvalidInputError",
    "LocalGrid",
    "LogicError",
    "MappingFramework",
    "OccState",
    "OracleGrid",
    "ProbParams",
    "ProjectionAxis",
    "Scene",
    "SensorSpec",
    "SlideRegions",
    "VoxelIndex",
    "WorldPoint",
    "analytic_voxel_estimate",
    "builtin_scenes",
    "clamp_logodds",
    "compare_states",
    "compute_boundary_voxel_status",
    "compute_slide_regions",
    "hash_cell",
    "kernel_backend_name",
    "logodds_to_prob",
    "make_scene",
    "mapping_space_voxels",
    "pack",
    "prob_to_logodds",
    "simulate_scan",
    "state_from_logodds",
    "unpack",
    "world_to_voxel",
]
