"""Per-voxel incremental meshing: pull, commit, push.

Each activated voxel is re-triangulated from scratch: its vertices are
retrieved together with neighbors within the dilation radius (eroding the
gaps between adjacent voxels), projected onto the voxel's fitted plane,
triangulated in 2D, and lifted back to 3D with normals facing the sensor.
The freshly built facet set is diffed against the facets already stored
for those vertices (pull -> commit), and the accumulated deltas from all
voxels are applied to the map in a single serialized push.

The per-voxel phase only reads shared state, so voxels can be processed
by any number of workers; the push phase merges deltas in sorted voxel-key
order, making the final mesh independent of scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from scanmesh.delaunay import DegenerateInput, delaunay_2d
from scanmesh.geometry import PlaneStats
from scanmesh.map import MeshMap, TriangleFacet, Voxel
from scanmesh.spatial import GridKey

ZERO_AREA_EPS = 1e-12
COLLINEAR_RMS_EPS = 1e-9


class MeshIntegrityError(RuntimeError):
    """Pull/commit/push bookkeeping produced an impossible operation."""


@dataclass
class VoxelMeshDelta:
    to_add: dict = field(default_factory=dict)      # facet key -> TriangleFacet
    to_erase: set = field(default_factory=set)      # facet keys


@dataclass
class MeshUpdateReport:
    processed_keys: list = field(default_factory=list)
    skipped_keys: list = field(default_factory=list)
    added_count: int = 0
    erased_count: int = 0
    voxel_facets: dict = field(default_factory=dict)  # key -> set of facet keys


def retrieve_vertices(mesh_map: MeshMap, voxel: Voxel) -> list[int]:
    """In-voxel vertex ids plus all vertices within the dilation radius."""
    if not voxel.vertex_ids:
        return []
    ids = set(voxel.vertex_ids)
    positions = np.array([mesh_map.vertices[v].pos for v in voxel.vertex_ids])
    for ball in mesh_map.knn.radius_many(positions, mesh_map.config.dilation_radius):
        ids.update(ball)
    return sorted(ids)


def project_to_plane(positions: np.ndarray, stats: PlaneStats) -> np.ndarray:
    """Project points onto the plane spanned by the two principal directions.

    Coordinates are (p - mean) dotted with the first two eigenvectors; the
    third (smallest-eigenvalue) eigenvector is the plane normal.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if positions.shape[0] < 3:
        raise DegenerateInput("need at least 3 vertices to project")
    centered = positions - stats.mean
    return centered @ stats.eigenvectors[:, :2]


def lift_and_orient(triples, ids, positions: np.ndarray, sensor_pos: np.ndarray,
                    sliver_c2se_max: float = 0.0) -> dict:
    """Build facets from index triples; normals face the sensor.

    When the normal is flipped, the published winding swaps the first two
    ids so downstream renderers see a consistent front face.  Triangles
    with cross-product norm below 1e-12 are dropped, as are slivers whose
    circumradius / shortest-edge ratio exceeds sliver_c2se_max (if > 0).
    """
    facets: dict[tuple[int, int, int], TriangleFacet] = {}
    sx, sy, sz = (float(v) for v in sensor_pos)
    for triple in triples:
        local = sorted(triple, key=lambda t: ids[t])
        ga, gb, gc = (ids[t] for t in local)
        ax, ay, az = positions[local[0]]
        bx, by, bz = positions[local[1]]
        cx, cy, cz = positions[local[2]]
        ux, uy, uz = ax - bx, ay - by, az - bz
        vx, vy, vz = cx - bx, cy - by, cz - bz
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        norm = math.sqrt(nx * nx + ny * ny + nz * nz)
        if norm < ZERO_AREA_EPS:
            continue
        if sliver_c2se_max > 0.0:
            ea = math.sqrt((bx - cx) ** 2 + (by - cy) ** 2 + (bz - cz) ** 2)
            eb = math.sqrt((ax - cx) ** 2 + (ay - cy) ** 2 + (az - cz) ** 2)
            ec = math.sqrt(ux * ux + uy * uy + uz * uz)
            # circumradius = ea*eb*ec / (4 * area); norm is twice the area
            if ea * eb * ec / (2.0 * norm) > sliver_c2se_max * min(ea, eb, ec):
                continue
        nx, ny, nz = nx / norm, ny / norm, nz / norm
        mx = (ax + bx + cx) / 3.0
        my = (ay + by + cy) / 3.0
        mz = (az + bz + cz) / 3.0
        published = (ga, gb, gc)
        if (sx - mx) * nx + (sy - my) * ny + (sz - mz) * nz < 0.0:
            nx, ny, nz = -nx, -ny, -nz
            published = (gb, ga, gc)
        key = (ga, gb, gc)
        facets[key] = TriangleFacet(key, np.array([mx, my, mz]),
                                    np.array([nx, ny, nz]), published)
    return facets


def mesh_pull(mesh_map: MeshMap, vertex_ids) -> set:
    """Stored facets whose three vertices all lie in the retrieved set."""
    id_set = set(vertex_ids)
    pulled: set[tuple[int, int, int]] = set()
    for vid in id_set:
        for key in mesh_map.vertices[vid].tri_list:
            if key[0] in id_set and key[1] in id_set and key[2] in id_set:
                pulled.add(key)
    return pulled


def mesh_commit(new_facets: dict, pulled: set) -> VoxelMeshDelta:
    """Set difference between the fresh triangulation and the pulled facets."""
    delta = VoxelMeshDelta()
    for key, facet in new_facets.items():
        if key not in pulled:
            delta.to_add[key] = facet
    delta.to_erase = {key for key in pulled if key not in new_facets}
    return delta


def _add_facet(mesh_map: MeshMap, facet: TriangleFacet) -> None:
    key = facet.pts_id
    existing = mesh_map.facets.get(key)
    region = mesh_map.get_or_create_region(facet.center)
    region.sync_required = True
    if existing is not None:
        # Re-created by another voxel this pass: refresh orientation only
        # (positions never move, so center and owning region are unchanged).
        existing.normal = facet.normal
        existing.published_order = facet.published_order
        existing.center = facet.center
        return
    mesh_map.facets.put(key, facet)
    region.facets.add(key)
    for vid in key:
        mesh_map.vertices[vid].tri_list.add(key)


def _erase_facet(mesh_map: MeshMap, key) -> None:
    facet = mesh_map.facets.get(key)
    if facet is None:
        raise MeshIntegrityError(f"erasing non-existent facet {key}")
    for vid in key:
        mesh_map.vertices[vid].tri_list.discard(key)
    region = mesh_map.regions.get(mesh_map.region_key(facet.center))
    if region is None or key not in region.facets:
        raise MeshIntegrityError(f"facet {key} missing from its region")
    region.facets.discard(key)
    region.sync_required = True
    mesh_map.facets.remove(key)


def mesh_push(mesh_map: MeshMap, delta: VoxelMeshDelta) -> None:
    """Apply one voxel's delta: erase first, then add (serialized phase only)."""
    for key in sorted(delta.to_erase):
        _erase_facet(mesh_map, key)
    for key in sorted(delta.to_add):
        _add_facet(mesh_map, delta.to_add[key])


def _process_voxel(mesh_map: MeshMap, key: GridKey, sensor_pos: np.ndarray):
    """Read-only per-voxel phase: returns (fresh facet dict, delta) or None."""
    voxel = mesh_map.voxels[key]
    ids = retrieve_vertices(mesh_map, voxel)
    if len(ids) < 3:
        return None
    positions = np.array([mesh_map.vertices[v].pos for v in ids])
    proj = project_to_plane(positions, voxel.stats)
    centered = proj - proj.mean(axis=0)
    spread = np.linalg.svd(centered, compute_uv=False)
    if spread[1] < COLLINEAR_RMS_EPS * np.sqrt(len(ids)):
        return None
    try:
        triples = delaunay_2d(proj)
    except DegenerateInput:
        return None
    fresh = lift_and_orient(triples, ids, positions, sensor_pos,
                            sliver_c2se_max=mesh_map.config.sliver_c2se_max)
    pulled = mesh_pull(mesh_map, ids)
    return fresh, mesh_commit(fresh, pulled)


def mesh_update(mesh_map: MeshMap, activated_keys=None,
                sensor_pos=None, workers: int = 1) -> MeshUpdateReport:
    """Re-mesh all activated voxels and reconcile the deltas into the map.

    Voxels with fewer than 3 retrieved vertices or a rank-deficient
    projection are skipped.  A facet key is erased only if no processed
    voxel's fresh triangulation still contains it (present wins), then all
    additions are applied; finally every processed voxel is deactivated.
    """
    if activated_keys is None:
        activated_keys = mesh_map.activated_voxel_keys()
    keys = sorted(activated_keys)
    if sensor_pos is None:
        sensor_pos = np.zeros(3)
    sensor_pos = np.asarray(sensor_pos, dtype=np.float64)

    report = MeshUpdateReport()
    if not keys:
        return report

    if workers > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda k: _process_voxel(mesh_map, k, sensor_pos), keys))
    else:
        results = [_process_voxel(mesh_map, k, sensor_pos) for k in keys]

    keep: set = set()
    erase: set = set()
    add: dict = {}
    for key, result in zip(keys, results):
        if result is None:
            report.skipped_keys.append(key)
            report.voxel_facets[key] = None
            continue
        fresh, delta = result
        report.processed_keys.append(key)
        report.voxel_facets[key] = set(fresh.keys())
        keep.update(fresh.keys())
        erase.update(delta.to_erase)
        add.update(delta.to_add)

    erase.difference_update(keep)
    for fkey in sorted(erase):
        _erase_facet(mesh_map, fkey)
    for fkey in sorted(add):
        _add_facet(mesh_map, add[fkey])
    report.erased_count = len(erase)
    report.added_count = len(add)

    for key in keys:
        mesh_map.voxels[key].activated = False
    return report
