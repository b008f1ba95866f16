"""Replay driver: register -> mesh per frame, periodic sync/export, reports.

Registration and meshing are timed with disjoint timers.  The frame loop
is sequential; parallelism only happens inside mesh_update's read-only
voxel phase, so a run's output is a pure function of (frames, config).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from scanmesh.broadcaster import Broadcaster, MeshSnapshot, export_mesh
from scanmesh.evaluation import (CorrectnessReport, FairnessReport, correctness,
                                 downsample_grid, fairness, sample_mesh_uniform)
from scanmesh.map import MapConfig, MeshMap, ScanFrame
from scanmesh.mesher import mesh_update


class IntegrityFailure(RuntimeError):
    """Referential-integrity sweep found violations."""


@dataclass
class RunConfig:
    map: MapConfig = field(default_factory=MapConfig)
    workers: int = 1
    export_every: int = 0        # frames between periodic exports; 0 = final only
    seed: int = 0
    check_integrity: bool = False

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        """Build from flat key=value strings (config file / CLI overrides)."""
        preset = values.get("preset")
        map_keys = ("min_vertex_spacing", "region_size", "voxel_size",
                    "dilation_radius", "downsample_leaf")
        overrides = {k: float(values[k]) for k in map_keys if k in values}
        if preset and preset != "custom":
            map_config = MapConfig.preset(preset, **overrides)
        else:
            map_config = MapConfig(**overrides)
        return cls(
            map=map_config,
            workers=int(values.get("workers", 1)),
            export_every=int(values.get("export_every", 0)),
            seed=int(values.get("seed", 0)),
            check_integrity=str(values.get("check_integrity", "0")).lower()
            in ("1", "true", "yes"),
        )


@dataclass
class FrameStats:
    timestamp: float
    registration_ms: float
    meshing_ms: float
    appended: int
    activated_voxels: int
    vertex_count: int
    facet_count: int


@dataclass
class RunReport:
    frames: list = field(default_factory=list)   # FrameStats
    vertex_count: int = 0
    facet_count: int = 0

    @property
    def meshing_mean_ms(self) -> float:
        if not self.frames:
            return 0.0
        return float(np.mean([f.meshing_ms for f in self.frames]))

    @property
    def registration_mean_ms(self) -> float:
        if not self.frames:
            return 0.0
        return float(np.mean([f.registration_ms for f in self.frames]))

    def to_dict(self) -> dict:
        return {
            "frames": [asdict(f) for f in self.frames],
            "vertex_count": self.vertex_count,
            "facet_count": self.facet_count,
            "meshing_mean_ms": self.meshing_mean_ms,
            "registration_mean_ms": self.registration_mean_ms,
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def run_pipeline(config: RunConfig, frames, out_mesh=None,
                 mesh_format: str = "ply") -> tuple[RunReport, MeshMap, Broadcaster]:
    """Replay frames through register + mesh; export the final mesh if asked.

    Raises IntegrityFailure when check_integrity is on and a sweep fails
    after any frame; malformed frames abort with their index.
    """
    mesh_map = MeshMap(config.map)
    broadcaster = Broadcaster()
    report = RunReport()

    for index, frame in enumerate(frames):
        if not isinstance(frame, ScanFrame):
            raise ValueError(f"frame {index}: expected ScanFrame, got {type(frame)!r}")
        try:
            t0 = time.perf_counter()
            reg = mesh_map.register_scan(frame)
            t1 = time.perf_counter()
            mesh_update(mesh_map, reg.activated_voxel_keys,
                        sensor_pos=frame.pose.translation, workers=config.workers)
            t2 = time.perf_counter()
        except ValueError as exc:
            raise ValueError(f"frame {index}: {exc}") from exc
        report.frames.append(FrameStats(
            timestamp=frame.timestamp,
            registration_ms=(t1 - t0) * 1e3,
            meshing_ms=(t2 - t1) * 1e3,
            appended=len(reg.appended_vertex_ids),
            activated_voxels=len(reg.activated_voxel_keys),
            vertex_count=len(mesh_map.vertices),
            facet_count=len(mesh_map.facets),
        ))
        if config.check_integrity:
            errors = mesh_map.check_integrity()
            if errors:
                raise IntegrityFailure(
                    f"frame {index}: {len(errors)} violations; first: {errors[0]}")
        if config.export_every and out_mesh and (index + 1) % config.export_every == 0:
            export_mesh(broadcaster.sync(mesh_map), out_mesh, fmt=mesh_format)

    report.vertex_count = len(mesh_map.vertices)
    report.facet_count = len(mesh_map.facets)
    if out_mesh:
        export_mesh(broadcaster.sync(mesh_map), out_mesh, fmt=mesh_format)
    return report, mesh_map, broadcaster


def evaluate_mesh(vertices: np.ndarray, faces: np.ndarray,
                  ground_truth: np.ndarray,
                  threshold: float = 0.05,
                  resolution: float = 0.01,
                  seed: int = 0) -> tuple[CorrectnessReport, FairnessReport]:
    """Sample the mesh, downsample ground truth, score correctness + fairness."""
    sampled = sample_mesh_uniform(vertices, faces, resolution, seed=seed)
    gt = downsample_grid(ground_truth, resolution)
    corr = correctness(sampled, gt, threshold=threshold,
                       sample_resolution=resolution)
    fair = fairness(vertices, faces)
    return corr, fair


def snapshot_arrays(snapshot: MeshSnapshot) -> tuple[np.ndarray, np.ndarray]:
    positions, faces, _ = snapshot.dense_faces()
    return positions, faces
