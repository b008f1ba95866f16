"""The shared map structure: mesh vertices, triangle facets, voxels, regions.

Two spatial partitions cover the scene: small voxels (side voxel_size) own
mesh vertices and their plane statistics; large regions (side region_size)
own triangle facets, keyed by facet center, with a sync flag consumed by
the broadcaster.  Scan registration transforms incoming points to the
world frame, drops points closer than min_vertex_spacing to an existing
vertex, and activates the voxels that received new vertices.

register_scan is single-writer: one registration mutates the map at a
time.  The mesher's parallel phase and the broadcaster only read.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scanmesh.geometry import PlaneStats, PoseSE3
from scanmesh.spatial import (GridKey, IncrementalKnnStore, SpatialHashTable,
                              grid_key, grid_keys)


@dataclass
class MapConfig:
    """Map resolution parameters.

    Presets match the two supported LiDAR classes:
    mechanical (0.15 / 15.0 / 0.60) and solid_state (0.10 / 10.0 / 0.40).
    """

    min_vertex_spacing: float = 0.10   # minimum distance between mesh vertices
    region_size: float = 10.0
    voxel_size: float = 0.40
    dilation_radius: float | None = None   # defaults to voxel_size / 4
    downsample_leaf: float | None = None   # defaults to min_vertex_spacing / 1.5
    # facets whose circumradius / shortest-edge exceeds this are slivers and
    # are never committed (~min interior angle 14.5 deg at 2.0); 0 disables
    sliver_c2se_max: float = 2.0

    def __post_init__(self):
        if self.dilation_radius is None:
            self.dilation_radius = self.voxel_size / 4.0
        if self.downsample_leaf is None:
            self.downsample_leaf = self.min_vertex_spacing / 1.5
        if not (0.0 < self.min_vertex_spacing < self.voxel_size < self.region_size):
            raise ValueError(
                "require 0 < min_vertex_spacing < voxel_size < region_size, got "
                f"{self.min_vertex_spacing}, {self.voxel_size}, {self.region_size}")

    @classmethod
    def preset(cls, name: str, **overrides) -> "MapConfig":
        presets = {
            "mechanical": dict(min_vertex_spacing=0.15, region_size=15.0, voxel_size=0.60),
            "solid_state": dict(min_vertex_spacing=0.10, region_size=10.0, voxel_size=0.40),
        }
        if name not in presets:
            raise ValueError(f"unknown preset {name!r} (use mechanical or solid_state)")
        params = dict(presets[name])
        params.update(overrides)
        return cls(**params)


@dataclass
class ScanFrame:
    """One timestamped point-cloud frame with its sensor-to-world pose."""

    timestamp: float
    points: np.ndarray          # (N, 3) in the sensor frame
    pose: PoseSE3


class MeshVertex:
    __slots__ = ("id", "pos", "tri_list")

    def __init__(self, vid: int, pos: np.ndarray):
        self.id = vid
        self.pos = pos
        self.tri_list: set[tuple[int, int, int]] = set()


class TriangleFacet:
    """Three sorted vertex ids plus cached center/normal.

    published_order carries the winding used when exporting: the first two
    ids are swapped whenever the normal was flipped to face the sensor.
    """

    __slots__ = ("pts_id", "center", "normal", "published_order")

    def __init__(self, pts_id, center, normal, published_order):
        self.pts_id = pts_id
        self.center = center
        self.normal = normal
        self.published_order = published_order


class Voxel:
    __slots__ = ("key", "vertex_ids", "stats", "activated")

    def __init__(self, key: GridKey):
        self.key = key
        self.vertex_ids: list[int] = []
        self.stats = PlaneStats()
        self.activated = False


class Region:
    __slots__ = ("key", "facets", "sync_required")

    def __init__(self, key: GridKey):
        self.key = key
        self.facets: set[tuple[int, int, int]] = set()
        self.sync_required = False


@dataclass
class RegistrationReport:
    appended_vertex_ids: list[int] = field(default_factory=list)
    activated_voxel_keys: list[GridKey] = field(default_factory=list)
    discarded_count: int = 0        # dropped by the minimum-spacing filter
    nonfinite_count: int = 0        # rejected as NaN/Inf before registration


class MeshMap:
    """Mutable reconstruction state shared by registration, meshing, broadcast."""

    def __init__(self, config: MapConfig):
        self.config = config
        self.vertices: list[MeshVertex] = []
        self.knn = IncrementalKnnStore()
        self.voxels = SpatialHashTable()
        self.regions = SpatialHashTable()
        self.facets = SpatialHashTable()

    # -- spatial containers ------------------------------------------------

    def voxel_key(self, p: np.ndarray) -> GridKey:
        return grid_key(p, self.config.voxel_size)

    def region_key(self, p: np.ndarray) -> GridKey:
        return grid_key(p, self.config.region_size)

    def get_or_create_voxel(self, p: np.ndarray) -> Voxel:
        key = self.voxel_key(p)
        voxel = self.voxels.get(key)
        if voxel is None:
            voxel = Voxel(key)
            self.voxels.put(key, voxel)
        return voxel

    def get_or_create_region(self, p: np.ndarray) -> Region:
        key = self.region_key(p)
        region = self.regions.get(key)
        if region is None:
            region = Region(key)
            self.regions.put(key, region)
        return region

    def activated_voxel_keys(self) -> list[GridKey]:
        return sorted(k for k, v in self.voxels.items() if v.activated)

    # -- registration ------------------------------------------------------

    def register_scan(self, frame: ScanFrame) -> RegistrationReport:
        """Register a frame: transform, downsample, spacing-filter, append.

        Points are transformed to the world frame, reduced to one
        representative per downsample_leaf cell (first point in input
        order), and appended as mesh vertices unless closer than
        min_vertex_spacing to an existing vertex.  Appending updates the
        owning voxel's plane statistics and activates it; the containing
        region is created on demand.
        """
        if not frame.pose.is_valid():
            raise ValueError("invalid frame pose: rotation not orthonormal")
        report = RegistrationReport()
        pts = np.asarray(frame.points, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] == 0:
            return report

        finite = np.all(np.isfinite(pts), axis=1)
        report.nonfinite_count = int(pts.shape[0] - finite.sum())
        pts = frame.pose.apply(pts[finite])
        if pts.shape[0] == 0:
            return report

        # One representative per leaf cell, keeping first-in-frame order so
        # vertices stay actual measurements and the pass is deterministic.
        leaf_keys = grid_keys(pts, self.config.downsample_leaf)
        _, first_idx = np.unique(leaf_keys, axis=0, return_index=True)
        pts = pts[np.sort(first_idx)]

        xi = self.config.min_vertex_spacing
        # Distances to the pre-existing map are batched; vertices appended
        # within this frame are tracked in a frame-local grid at cell = xi.
        if len(self.knn):
            base_dist = self.knn.nearest_many(pts)
        else:
            base_dist = np.full(pts.shape[0], np.inf)
        survivors = np.nonzero(base_dist >= xi)[0]
        report.discarded_count = int(pts.shape[0] - survivors.size)
        cells = np.floor(pts[survivors] / xi).astype(np.int64)

        local: dict[tuple[int, int, int], list[tuple[float, float, float]]] = {}
        xi2 = xi * xi
        offsets = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
                   for dz in (-1, 0, 1)]

        new_ids: list[int] = []
        new_pts: list[np.ndarray] = []
        activated: dict[GridKey, list[np.ndarray]] = {}

        for row, i in enumerate(survivors):
            p = pts[i]
            px, py, pz = float(p[0]), float(p[1]), float(p[2])
            cx, cy, cz = (int(v) for v in cells[row])
            blocked = False
            for dx, dy, dz in offsets:
                cell = local.get((cx + dx, cy + dy, cz + dz))
                if cell:
                    for qx, qy, qz in cell:
                        ddx = px - qx
                        ddy = py - qy
                        ddz = pz - qz
                        if ddx * ddx + ddy * ddy + ddz * ddz < xi2:
                            blocked = True
                            break
                    if blocked:
                        break
            if blocked:
                report.discarded_count += 1
                continue

            vid = len(self.vertices)
            vertex = MeshVertex(vid, p)
            self.vertices.append(vertex)
            local.setdefault((cx, cy, cz), []).append((px, py, pz))
            new_ids.append(vid)
            new_pts.append(p)

            voxel = self.get_or_create_voxel(p)
            voxel.vertex_ids.append(vid)
            voxel.activated = True
            activated.setdefault(voxel.key, []).append(p)
            self.get_or_create_region(p)

        if new_ids:
            self.knn.extend(new_ids, new_pts)
            for key, batch in activated.items():
                self.voxels[key].stats.update(np.array(batch))

        report.appended_vertex_ids = new_ids
        report.activated_voxel_keys = sorted(activated.keys())
        return report

    # -- consistency -------------------------------------------------------

    def check_integrity(self) -> list[str]:
        """Full referential sweep; returns human-readable violations (empty = ok)."""
        errors: list[str] = []
        for i, v in enumerate(self.vertices):
            if v.id != i:
                errors.append(f"vertex {i} carries id {v.id}")
            for key in v.tri_list:
                facet = self.facets.get(key)
                if facet is None:
                    errors.append(f"vertex {i} references dead facet {key}")
                elif i not in facet.pts_id:
                    errors.append(f"vertex {i} lists facet {key} not containing it")

        region_membership: dict[tuple, int] = {}
        for rkey, region in self.regions.items():
            for fkey in region.facets:
                region_membership[fkey] = region_membership.get(fkey, 0) + 1
                if fkey not in self.facets:
                    errors.append(f"region {tuple(rkey)[:3]} lists dead facet {fkey}")

        for fkey, facet in self.facets.items():
            i, j, k = facet.pts_id
            if not (i < j < k):
                errors.append(f"facet {fkey} ids not sorted")
            if k >= len(self.vertices):
                errors.append(f"facet {fkey} references missing vertex")
                continue
            for vid in facet.pts_id:
                if facet.pts_id not in self.vertices[vid].tri_list:
                    errors.append(f"facet {fkey} missing from tri_list of {vid}")
            pos = [self.vertices[vid].pos for vid in facet.pts_id]
            center = (pos[0] + pos[1] + pos[2]) / 3.0
            if np.max(np.abs(center - facet.center)) > 1e-9:
                errors.append(f"facet {fkey} center stale")
            if abs(np.linalg.norm(facet.normal) - 1.0) > 1e-9:
                errors.append(f"facet {fkey} normal not unit")
            count = region_membership.get(facet.pts_id, 0)
            if count != 1:
                errors.append(f"facet {fkey} in {count} regions (expect 1)")
            owner = self.regions.get(self.region_key(facet.center))
            if owner is None or facet.pts_id not in owner.facets:
                errors.append(f"facet {fkey} not in its center's region")

        for vkey, voxel in self.voxels.items():
            for vid in voxel.vertex_ids:
                if not vkey.contains(self.vertices[vid].pos):
                    errors.append(f"vertex {vid} outside voxel {tuple(vkey)[:3]}")
        return errors
