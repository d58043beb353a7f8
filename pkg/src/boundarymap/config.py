"""Run configuration: a JSON file plus command-line overrides.

Example config::

    {
      "resolution": 0.2,
      "local_size": [8.0, 8.0, 4.0],
      "slide_threshold": 1,
      "p_hit": 0.8, "p_miss": 0.48,
      "p_min": 0.05, "p_max": 0.97,
      "p_free": 0.2, "p_occ": 0.8,
      "axis": "z",
      "table_size": 1024,
      "scene": "corridor",
      "replay": null,
      "seed": 0
    }

``scene`` may name a built-in or point at a scene file; ``replay`` points at
a replay directory and takes precedence when both are set.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .core import InvalidInputError, ProbParams, ProjectionAxis
from .formats import read_scene
from .simgen import Scene, builtin_scenes


@dataclass
class RunConfig:
    resolution: float = 0.2
    local_size: tuple[float, float, float] = (8.0, 8.0, 4.0)
    slide_threshold: int = 1
    p_hit: float = 0.8
    p_miss: float = 0.48
    p_min: float = 0.05
    p_max: float = 0.97
    p_free: float = 0.2
    p_occ: float = 0.8
    sensor_range: float | None = None  # default: taken from the scene sensor
    axis: str = "z"
    table_size: int = 1024
    scene: str | None = None
    replay: str | None = None
    seed: int = 0
    scans: int | None = None  # optional cap on replayed scans

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}: invalid JSON ({exc})") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidInputError(f"{path}: unknown config keys {sorted(unknown)}")
        if "local_size" in raw:
            raw["local_size"] = tuple(raw["local_size"])
        return cls(**raw)

    def apply_overrides(self, args) -> "RunConfig":
        """Fold non-None attributes of an argparse namespace into the config."""
        for f in fields(self):
            val = getattr(args, f.name, None)
            if val is not None:
                setattr(self, f.name, tuple(val) if f.name == "local_size" else val)
        return self

    def prob_params(self) -> ProbParams:
        if self.resolution <= 0 or not math.isfinite(self.resolution):
            raise InvalidInputError(f"resolution must be positive, got {self.resolution}")
        sensor_range = self.sensor_range
        if sensor_range is None:
            scene = self.load_scene() if self.scene else None
            sensor_range = scene.sensor.max_range if scene else 10.0
        return ProbParams.from_probabilities(
            p_hit=self.p_hit,
            p_miss=self.p_miss,
            p_min=self.p_min,
            p_max=self.p_max,
            p_free=self.p_free,
            p_occ=self.p_occ,
            resolution=self.resolution,
            sensor_range=sensor_range,
        )

    def projection_axis(self) -> ProjectionAxis:
        return ProjectionAxis.from_name(self.axis)

    def local_dims(self) -> tuple[int, int, int]:
        """Local map dimensions in voxels (world axis order)."""
        dims = tuple(max(1, round(s / self.resolution)) for s in self.local_size)
        return dims

    def load_scene(self) -> Scene:
        if self.scene is None:
            raise InvalidInputError("config selects no scene")
        catalog = builtin_scenes()
        if self.scene in catalog:
            scene = catalog[self.scene](seed=self.seed) if self.seed else catalog[self.scene]()
            return scene
        path = Path(self.scene)
        if not path.exists():
            raise InvalidInputError(
                f"scene {self.scene!r} is neither a built-in {sorted(catalog)} nor a file"
            )
        return read_scene(path)
