"""Mesh publication: snapshots, file export, depth rasterization, reinforcement.

The broadcaster keeps a persistent per-region copy of the facet arrays and
refreshes only regions whose sync flag is raised, so repeated snapshots of
a quiet map cost nothing.  Snapshots are immutable and self-contained;
rasterization and unprojection operate on snapshots only.

Depth convention: a pixel's value is the distance along the camera z axis
(planar depth), 0.0 encodes no hit.  Back faces are not culled so depth is
independent of facet winding.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from scanmesh.geometry import PoseSE3
from scanmesh.map import MeshMap

NO_HIT = 0.0


@dataclass
class MeshSnapshot:
    """Consistent copy of the published mesh.

    Facet triples reference global vertex ids; every referenced id is
    present in vertex_ids.  published order carries the export winding.
    """

    vertex_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    vertex_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    facet_keys: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    facet_published: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    facet_normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    frame_counter: int = 0

    @property
    def facet_count(self) -> int:
        return int(self.facet_keys.shape[0])

    @property
    def vertex_count(self) -> int:
        return int(self.vertex_ids.shape[0])

    def dense_faces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(positions, faces, id_map): faces index the dense position array."""
        if self.facet_count == 0:
            return self.vertex_positions, np.zeros((0, 3), dtype=np.int64), self.vertex_ids
        index = {int(v): i for i, v in enumerate(self.vertex_ids)}
        faces = np.array([[index[int(a)], index[int(b)], index[int(c)]]
                          for a, b, c in self.facet_published], dtype=np.int64)
        return self.vertex_positions, faces, self.vertex_ids


class Broadcaster:
    """Copies facets out of sync-required regions into a structured store."""

    def __init__(self):
        self._regions: dict[tuple, list] = {}
        self.frame_counter = 0

    def sync(self, mesh_map: MeshMap) -> MeshSnapshot:
        """Refresh regions flagged sync-required, then assemble a snapshot.

        Must not run concurrently with mesh_push (single consistency
        domain); regions untouched since the previous sync are reused.
        """
        for rkey, region in mesh_map.regions.items():
            if not region.sync_required:
                continue
            records = []
            for fkey in sorted(region.facets):
                facet = mesh_map.facets[fkey]
                records.append((fkey, facet.published_order, facet.normal.copy()))
            self._regions[tuple(rkey)[:3]] = records
            region.sync_required = False
        self.frame_counter += 1
        return self._assemble(mesh_map)

    def _assemble(self, mesh_map: MeshMap) -> MeshSnapshot:
        keys: list = []
        published: list = []
        normals: list = []
        for rkey in sorted(self._regions):
            for fkey, pub, normal in self._regions[rkey]:
                keys.append(fkey)
                published.append(pub)
                normals.append(normal)
        snap = MeshSnapshot(frame_counter=self.frame_counter)
        if keys:
            order = sorted(range(len(keys)), key=lambda i: keys[i])
            snap.facet_keys = np.array([keys[i] for i in order], dtype=np.int64)
            snap.facet_published = np.array([published[i] for i in order], dtype=np.int64)
            snap.facet_normals = np.array([normals[i] for i in order])
            ids = np.unique(snap.facet_keys)
            snap.vertex_ids = ids
            snap.vertex_positions = np.array(
                [mesh_map.vertices[int(v)].pos for v in ids])
        return snap


# -- mesh file export/import -------------------------------------------------

def serialize_mesh(snapshot: MeshSnapshot, fmt: str = "ply",
                   binary: bool = True) -> tuple[bytes, list[int]]:
    """Encode a snapshot as PLY/OBJ bytes plus the dense-to-global id map.

    Vertex ids are remapped densely; face winding follows published_order so
    the sensor-facing orientation survives export.
    """
    positions, faces, id_map = snapshot.dense_faces()
    fmt = fmt.lower()
    if fmt == "ply":
        payload = _ply_bytes(positions, faces, binary)
    elif fmt == "obj":
        payload = _obj_bytes(positions, faces)
    else:
        raise ValueError(f"unsupported mesh format {fmt!r}")
    return payload, [int(v) for v in id_map]


def export_mesh(snapshot: MeshSnapshot, path: str, fmt: str = "ply",
                binary: bool = True) -> None:
    """Write the mesh file plus the <path>.idmap.json sidecar."""
    payload, id_map = serialize_mesh(snapshot, fmt, binary)
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
        with open(str(path) + ".idmap.json", "w") as fh:
            json.dump({"dense_to_global": id_map}, fh)
    except OSError as exc:
        raise OSError(f"writing mesh to {path}: {exc}") from exc


def _ply_bytes(positions, faces, binary: bool) -> bytes:
    n, m = positions.shape[0], faces.shape[0]
    fmt_line = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt_line} 1.0\n"
        f"element vertex {n}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        f"element face {m}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    out = [header.encode("ascii")]
    if binary:
        out.append(np.ascontiguousarray(positions, dtype="<f8").tobytes())
        for a, b, c in faces:
            out.append(struct.pack("<Biii", 3, int(a), int(b), int(c)))
    else:
        for p in positions:
            out.append(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n".encode("ascii"))
        for a, b, c in faces:
            out.append(f"3 {a} {b} {c}\n".encode("ascii"))
    return b"".join(out)


def _obj_bytes(positions, faces) -> bytes:
    out = []
    for p in positions:
        out.append(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
    for a, b, c in faces:
        out.append(f"f {a + 1} {b + 1} {c + 1}\n")
    return "".join(out).encode("ascii")


def load_mesh(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read a PLY (as written here) or OBJ file -> (positions, faces)."""
    path = str(path)
    try:
        if path.lower().endswith(".obj"):
            return _read_obj(path)
        return _read_ply(path)
    except OSError as exc:
        raise OSError(f"reading mesh from {path}: {exc}") from exc


def _read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for i in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[i], idx[i + 1]])
    return (np.array(verts, dtype=np.float64).reshape(-1, 3),
            np.array(faces, dtype=np.int64).reshape(-1, 3))


def _read_ply(path):
    with open(path, "rb") as fh:
        line = fh.readline().strip()
        if line != b"ply":
            raise ValueError(f"{path}: not a PLY file")
        binary = False
        n = m = 0
        props: list[str] = []
        element = None
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: unterminated PLY header")
            tokens = line.strip().split()
            if not tokens:
                continue
            if tokens[0] == b"format":
                binary = tokens[1] == b"binary_little_endian"
            elif tokens[0] == b"element":
                element = tokens[1]
                if element == b"vertex":
                    n = int(tokens[2])
                elif element == b"face":
                    m = int(tokens[2])
            elif tokens[0] == b"property" and element == b"vertex":
                props.append(tokens[-2].decode())
            elif tokens[0] == b"end_header":
                break
        if binary:
            dtype = np.dtype("<f8") if "double" in props else np.dtype("<f4")
            verts = np.frombuffer(
                fh.read(n * 3 * dtype.itemsize), dtype=dtype).reshape(n, 3)
            faces = np.zeros((m, 3), dtype=np.int64)
            for i in range(m):
                cnt = struct.unpack("<B", fh.read(1))[0]
                idx = struct.unpack(f"<{cnt}i", fh.read(4 * cnt))
                faces[i] = idx[:3]
            return verts.astype(np.float64), faces
        verts = np.zeros((n, 3))
        for i in range(n):
            verts[i] = [float(x) for x in fh.readline().split()[:3]]
        faces = np.zeros((m, 3), dtype=np.int64)
        for i in range(m):
            parts = fh.readline().split()
            faces[i] = [int(x) for x in parts[1:4]]
        return verts, faces


# -- depth rasterization -------------------------------------------------------

@dataclass
class CameraModel:
    """Pinhole camera: +z forward, +x right, +y down; pose maps camera->world."""

    width: int
    height: int
    horizontal_fov: float   # degrees
    vertical_fov: float     # degrees
    pose: PoseSE3 = field(default_factory=PoseSE3.identity)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if not (0.0 < self.horizontal_fov < 180.0 and 0.0 < self.vertical_fov < 180.0):
            raise ValueError("field of view must be in (0, 180) degrees")

    @property
    def fx(self) -> float:
        return (self.width / 2.0) / np.tan(np.radians(self.horizontal_fov) / 2.0)

    @property
    def fy(self) -> float:
        return (self.height / 2.0) / np.tan(np.radians(self.vertical_fov) / 2.0)

    @property
    def cx(self) -> float:
        return self.width / 2.0

    @property
    def cy(self) -> float:
        return self.height / 2.0

    def pixel_rays(self) -> np.ndarray:
        """Unit ray directions through all pixel centers, camera frame, (H*W, 3)."""
        u = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        v = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        uu, vv = np.meshgrid(u, v)
        dirs = np.stack([uu, vv, np.ones_like(uu)], axis=-1).reshape(-1, 3)
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass
class DepthImage:
    data: np.ndarray          # (H, W), planar depth in meters, 0.0 = no hit
    camera: CameraModel
    far: float = 1.0e4

    @property
    def hit_mask(self) -> np.ndarray:
        return self.data > 0.0


_NEAR = 1e-6


def _clip_near(tri: np.ndarray, near: float) -> list[np.ndarray]:
    """Clip a camera-space triangle against z >= near; returns 0..2 triangles."""
    inside = tri[:, 2] >= near
    cnt = int(inside.sum())
    if cnt == 0:
        return []
    if cnt == 3:
        return [tri]
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        ain, bin_ = a[2] >= near, b[2] >= near
        if ain:
            poly.append(a)
        if ain != bin_:
            t = (near - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
    tris = []
    for i in range(1, len(poly) - 1):
        tris.append(np.array([poly[0], poly[i], poly[i + 1]]))
    return tris


def rasterize_depth(snapshot: MeshSnapshot, camera: CameraModel,
                    far: float = 1.0e4) -> DepthImage:
    """Z-buffer rasterization of the snapshot into a planar depth image.

    Pixel centers are sampled with perspective-correct interpolation of
    1/z; triangles straddling the camera plane are clipped at z=near and
    back faces are kept.
    """
    h, w = camera.height, camera.width
    depth = np.full((h, w), np.inf)
    positions, faces, _ = snapshot.dense_faces()
    if faces.shape[0]:
        inv = camera.pose.inverse()
        cam_pts = inv.apply(positions)
        fx, fy, cx, cy = camera.fx, camera.fy, camera.cx, camera.cy
        for face in faces:
            for tri in _clip_near(cam_pts[face], _NEAR):
                z = tri[:, 2]
                us = fx * tri[:, 0] / z + cx
                vs = fy * tri[:, 1] / z + cy
                _raster_triangle(depth, us, vs, 1.0 / z)
    depth[~np.isfinite(depth)] = NO_HIT
    depth[depth > far] = NO_HIT
    return DepthImage(depth, camera, far)


def _raster_triangle(depth: np.ndarray, us, vs, inv_z) -> None:
    h, w = depth.shape
    x0 = max(int(np.floor(us.min() - 0.5)), 0)
    x1 = min(int(np.ceil(us.max() - 0.5)), w - 1)
    y0 = max(int(np.floor(vs.min() - 0.5)), 0)
    y1 = min(int(np.ceil(vs.max() - 0.5)), h - 1)
    if x1 < x0 or y1 < y0:
        return
    area = (us[1] - us[0]) * (vs[2] - vs[0]) - (vs[1] - vs[0]) * (us[2] - us[0])
    if area == 0.0:
        return
    if area < 0.0:  # normalize winding so barycentrics are positive inside
        us = us[[0, 2, 1]]
        vs = vs[[0, 2, 1]]
        inv_z = inv_z[[0, 2, 1]]
        area = -area
    px = np.arange(x0, x1 + 1) + 0.5
    py = np.arange(y0, y1 + 1) + 0.5
    gx, gy = np.meshgrid(px, py)
    w0 = (us[1] - gx) * (vs[2] - gy) - (vs[1] - gy) * (us[2] - gx)
    w1 = (us[2] - gx) * (vs[0] - gy) - (vs[2] - gy) * (us[0] - gx)
    w2 = (us[0] - gx) * (vs[1] - gy) - (vs[0] - gy) * (us[1] - gx)
    inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
    if not inside.any():
        return
    zi = (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]) / area
    with np.errstate(divide="ignore"):
        z = np.where(inside & (zi > 0), 1.0 / zi, np.inf)
    window = depth[y0:y1 + 1, x0:x1 + 1]
    np.minimum(window, z, out=window)


def reinforce_points(depth: DepthImage) -> np.ndarray:
    """Unproject every hit pixel through the camera into world-frame points."""
    cam = depth.camera
    h, w = depth.data.shape
    mask = depth.hit_mask
    if not mask.any():
        return np.zeros((0, 3))
    ys, xs = np.nonzero(mask)
    z = depth.data[ys, xs]
    x = (xs + 0.5 - cam.cx) / cam.fx * z
    y = (ys + 0.5 - cam.cy) / cam.fy * z
    pts_cam = np.stack([x, y, z], axis=1)
    return cam.pose.apply(pts_cam)
