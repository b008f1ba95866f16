"""Synthetic scenes and simulated depth-image scanning.

Scenes are lists of analytic primitives (rectangles, axis-aligned boxes,
triangles) supporting exact ray intersection, exact point-to-surface
distance, and uniform surface sampling, so ground truth carries no
discretization error.  A scan renders one depth image through a pinhole
camera and unprojects hit pixels into sensor-frame points; with zero
noise every point is snapped exactly onto the primitive it hit.

Scene and scan-script files are plain text, one directive per line:

    # scene
    bounds xmin ymin zmin xmax ymax zmax
    quad ox oy oz  e1x e1y e1z  e2x e2y e2z      # rectangle, e1 perp e2
    box xmin ymin zmin xmax ymax zmax [skip_bottom]
    tri ax ay az  bx by bz  cx cy cz

    # scan script
    resolution 640 480
    fov 120.0 80.0
    sigma 0.0
    pose tx ty tz qx qy qz qw
    lookat ex ey ez  tx ty tz
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scanmesh.broadcaster import CameraModel
from scanmesh.geometry import PoseSE3
from scanmesh.map import ScanFrame

_EPS = 1e-12


class Quad:
    """Rectangle: origin plus two perpendicular edge vectors."""

    def __init__(self, origin, e1, e2):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.e1 = np.asarray(e1, dtype=np.float64)
        self.e2 = np.asarray(e2, dtype=np.float64)
        if abs(float(np.dot(self.e1, self.e2))) > 1e-9 * (
                np.linalg.norm(self.e1) * np.linalg.norm(self.e2)):
            raise ValueError("quad edges must be perpendicular")
        n = np.cross(self.e1, self.e2)
        self.normal = n / np.linalg.norm(n)

    def area(self) -> float:
        return float(np.linalg.norm(self.e1) * np.linalg.norm(self.e2))

    def ray_intersect(self, origin, dirs) -> np.ndarray:
        denom = dirs @ self.normal
        offset = float(np.dot(self.origin - origin, self.normal))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = offset / denom
            p = origin + t[:, None] * dirs
        rel = p - self.origin
        l1 = float(np.dot(self.e1, self.e1))
        l2 = float(np.dot(self.e2, self.e2))
        s1 = rel @ self.e1 / l1
        s2 = rel @ self.e2 / l2
        ok = (np.abs(denom) > _EPS) & (t > _EPS) & \
            (s1 >= 0.0) & (s1 <= 1.0) & (s2 >= 0.0) & (s2 <= 1.0)
        return np.where(ok, t, np.inf)

    def snap(self, points: np.ndarray) -> np.ndarray:
        rel = (points - self.origin) @ self.normal
        return points - rel[:, None] * self.normal

    def distance(self, points: np.ndarray) -> np.ndarray:
        rel = points - self.origin
        n = rel @ self.normal
        l1 = float(np.dot(self.e1, self.e1))
        l2 = float(np.dot(self.e2, self.e2))
        s1 = np.clip(rel @ self.e1 / l1, 0.0, 1.0)
        s2 = np.clip(rel @ self.e2 / l2, 0.0, 1.0)
        closest = self.origin + np.outer(s1, self.e1) + np.outer(s2, self.e2)
        return np.linalg.norm(points - closest, axis=1)

    def sample_surface(self, resolution: float) -> np.ndarray:
        len1 = np.linalg.norm(self.e1)
        len2 = np.linalg.norm(self.e2)
        n1 = max(1, int(round(len1 / resolution)))
        n2 = max(1, int(round(len2 / resolution)))
        s1 = (np.arange(n1) + 0.5) / n1
        s2 = (np.arange(n2) + 0.5) / n2
        g1, g2 = np.meshgrid(s1, s2)
        return (self.origin
                + np.outer(g1.ravel(), self.e1)
                + np.outer(g2.ravel(), self.e2))


class Box:
    """Axis-aligned box; skip_bottom leaves the -z face out of ground truth."""

    _FACE_AXES = [(0, -1), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)]

    def __init__(self, lo, hi, skip_bottom: bool = False):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        if np.any(self.hi <= self.lo):
            raise ValueError("box max must exceed min on every axis")
        self.skip_bottom = skip_bottom

    def area(self) -> float:
        d = self.hi - self.lo
        faces = 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2])
        if self.skip_bottom:
            faces -= d[0] * d[1]
        return float(faces)

    def ray_intersect(self, origin, dirs) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (self.lo - origin) / dirs
            t_hi = (self.hi - origin) / dirs
        t_near = np.nanmax(np.minimum(t_lo, t_hi), axis=1)
        t_far = np.nanmin(np.maximum(t_lo, t_hi), axis=1)
        hit = t_far >= np.maximum(t_near, _EPS)
        # entry face when outside, exit face when the origin is inside
        t = np.where(t_near > _EPS, t_near, t_far)
        return np.where(hit & (t > _EPS), t, np.inf)

    def snap(self, points: np.ndarray) -> np.ndarray:
        out = points.copy()
        # put each point exactly onto its nearest face plane
        d_lo = np.abs(points - self.lo)
        d_hi = np.abs(points - self.hi)
        both = np.concatenate([d_lo, d_hi], axis=1)
        face = both.argmin(axis=1)
        for f in range(6):
            sel = face == f
            axis = f % 3
            out[sel, axis] = self.lo[axis] if f < 3 else self.hi[axis]
        return out

    def distance(self, points: np.ndarray) -> np.ndarray:
        clamped = np.clip(points, self.lo, self.hi)
        outside = np.linalg.norm(points - clamped, axis=1)
        inside_gap = np.minimum(points - self.lo, self.hi - points).min(axis=1)
        return np.where(outside > 0.0, outside, np.abs(inside_gap))

    def _face_quad(self, axis: int, side: int) -> Quad:
        d = self.hi - self.lo
        origin = self.lo.copy()
        if side > 0:
            origin[axis] = self.hi[axis]
        others = [i for i in range(3) if i != axis]
        e1 = np.zeros(3)
        e2 = np.zeros(3)
        e1[others[0]] = d[others[0]]
        e2[others[1]] = d[others[1]]
        return Quad(origin, e1, e2)

    def sample_surface(self, resolution: float) -> np.ndarray:
        chunks = []
        for axis, side in self._FACE_AXES:
            if self.skip_bottom and axis == 2 and side < 0:
                continue
            chunks.append(self._face_quad(axis, side).sample_surface(resolution))
        return np.vstack(chunks)


class Triangle:
    def __init__(self, a, b, c):
        self.a = np.asarray(a, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.c = np.asarray(c, dtype=np.float64)
        n = np.cross(self.b - self.a, self.c - self.a)
        norm = np.linalg.norm(n)
        if norm < _EPS:
            raise ValueError("degenerate triangle")
        self.normal = n / norm

    def area(self) -> float:
        return 0.5 * float(np.linalg.norm(
            np.cross(self.b - self.a, self.c - self.a)))

    def ray_intersect(self, origin, dirs) -> np.ndarray:
        e1 = self.b - self.a
        e2 = self.c - self.a
        h = np.cross(dirs, e2)
        det = h @ e1
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            s = origin - self.a
            u = (s @ h.T if s.ndim > 1 else h @ s) * inv
            q = np.cross(s, e1)
            v = (dirs @ q) * inv
            t = (q @ e2) * inv
        ok = (np.abs(det) > _EPS) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > _EPS)
        return np.where(ok, t, np.inf)

    def snap(self, points: np.ndarray) -> np.ndarray:
        rel = (points - self.a) @ self.normal
        return points - rel[:, None] * self.normal

    def distance(self, points: np.ndarray) -> np.ndarray:
        # plane distance clamped to the triangle via barycentric projection
        e1 = self.b - self.a
        e2 = self.c - self.a
        rel = points - self.a
        d11 = float(e1 @ e1)
        d12 = float(e1 @ e2)
        d22 = float(e2 @ e2)
        r1 = rel @ e1
        r2 = rel @ e2
        denom = d11 * d22 - d12 * d12
        u = (d22 * r1 - d12 * r2) / denom
        v = (d11 * r2 - d12 * r1) / denom
        u = np.clip(u, 0.0, 1.0)
        v = np.clip(v, 0.0, 1.0)
        over = u + v > 1.0
        scale = np.where(over, u + v, 1.0)
        u, v = u / scale, v / scale
        closest = self.a + np.outer(u, e1) + np.outer(v, e2)
        return np.linalg.norm(points - closest, axis=1)

    def sample_surface(self, resolution: float) -> np.ndarray:
        e1 = self.b - self.a
        e2 = self.c - self.a
        n1 = max(1, int(round(np.linalg.norm(e1) / resolution)))
        n2 = max(1, int(round(np.linalg.norm(e2) / resolution)))
        s1 = (np.arange(n1) + 0.5) / n1
        s2 = (np.arange(n2) + 0.5) / n2
        g1, g2 = np.meshgrid(s1, s2)
        u = g1.ravel()
        v = g2.ravel()
        keep = u + v <= 1.0
        return self.a + np.outer(u[keep], e1) + np.outer(v[keep], e2)


@dataclass
class Scene:
    primitives: list = field(default_factory=list)
    bounds_lo: np.ndarray = field(default_factory=lambda: np.full(3, -50.0))
    bounds_hi: np.ndarray = field(default_factory=lambda: np.full(3, 50.0))

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.bounds_lo) and np.all(p <= self.bounds_hi))

    def ray_cast(self, origin, dirs):
        """Nearest hit over all primitives: (t, primitive index) per ray."""
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        best_t = np.full(dirs.shape[0], np.inf)
        best_i = np.full(dirs.shape[0], -1, dtype=np.int64)
        for i, prim in enumerate(self.primitives):
            t = prim.ray_intersect(np.asarray(origin, dtype=np.float64), dirs)
            closer = t < best_t
            best_t[closer] = t[closer]
            best_i[closer] = i
        return best_t, best_i

    def distance(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        best = np.full(points.shape[0], np.inf)
        for prim in self.primitives:
            best = np.minimum(best, prim.distance(points))
        return best

    def ground_truth_points(self, resolution: float) -> np.ndarray:
        """Uniform analytic sampling of every primitive surface."""
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        if not self.primitives:
            return np.zeros((0, 3))
        return np.vstack([p.sample_surface(resolution) for p in self.primitives])


@dataclass
class ScanScript:
    cameras: list          # CameraModel per scan pose
    sigma: float = 0.0


def render_scan(scene: Scene, camera: CameraModel, sigma: float = 0.0,
                seed: int = 0, scan_index: int = 0,
                timestamp: float = 0.0) -> ScanFrame:
    """Ray-cast one depth scan and unproject hits to sensor-frame points.

    With sigma == 0 every returned point lies exactly on the surface it
    hit; otherwise Gaussian noise of the given sigma is applied along the
    ray with an RNG keyed by (seed, scan_index).
    """
    if not scene.contains(camera.pose.translation):
        raise ValueError("camera outside scene bounds")
    dirs_cam = camera.pixel_rays()
    dirs_world = dirs_cam @ camera.pose.rotation.T
    origin = camera.pose.translation
    t, prim_idx = scene.ray_cast(origin, dirs_world)
    hit = np.isfinite(t)
    if sigma > 0.0:
        rng = np.random.default_rng((seed, scan_index))
        t = t + rng.normal(0.0, sigma, size=t.shape)
    points_world = origin + t[hit, None] * dirs_world[hit]
    if sigma == 0.0:
        idx = prim_idx[hit]
        for i in np.unique(idx):
            sel = idx == i
            points_world[sel] = scene.primitives[int(i)].snap(points_world[sel])
    points_sensor = camera.pose.inverse().apply(points_world)
    return ScanFrame(timestamp=timestamp, points=points_sensor, pose=camera.pose)


# -- builtin scenes ------------------------------------------------------------

def build_scene(name: str) -> Scene:
    """Builtin scenes: plane_only, box_town."""
    if name == "plane_only":
        quad = Quad(origin=(-8.0, -6.0, 5.0), e1=(16.0, 0.0, 0.0), e2=(0.0, 12.0, 0.0))
        return Scene([quad],
                     bounds_lo=np.array([-10.0, -8.0, -1.0]),
                     bounds_hi=np.array([10.0, 8.0, 6.0]))
    if name == "box_town":
        # 20 x 10 x 8 m urban block: ground plane plus three towers.
        ground = Quad(origin=(-10.0, -5.0, 0.0), e1=(20.0, 0.0, 0.0), e2=(0.0, 10.0, 0.0))
        towers = [
            Box((-7.0, -3.0, 0.0), (-4.0, 0.0, 6.0), skip_bottom=True),
            Box((1.0, -3.5, 0.0), (4.0, -1.0, 4.0), skip_bottom=True),
            Box((5.0, 1.5, 0.0), (8.0, 3.5, 7.0), skip_bottom=True),
        ]
        return Scene([ground] + towers,
                     bounds_lo=np.array([-10.0, -5.0, 0.0]),
                     bounds_hi=np.array([10.0, 5.0, 8.0]))
    raise ValueError(f"unknown builtin scene {name!r}")


def build_scan_script(scene_name: str, resolution=(640, 480),
                      hfov: float = 120.0, vfov: float = 80.0,
                      sigma: float = 0.0) -> ScanScript:
    """Builtin pose scripts covering the builtin scenes."""
    w, h = resolution
    if scene_name == "plane_only":
        eyes = [((0.0, 0.0, 0.0), (0.0, 0.0, 5.0)),
                ((-3.0, -2.0, 1.0), (-2.0, -1.0, 5.0)),
                ((3.0, 2.0, 1.0), (2.0, 1.0, 5.0)),
                ((0.0, -3.0, 0.5), (0.0, -2.0, 5.0))]
    elif scene_name == "box_town":
        eyes = [
            ((-9.0, -4.2, 2.0), (0.0, 0.0, 1.5)),
            ((9.0, -4.2, 2.0), (0.0, 0.0, 2.0)),
            ((9.0, 4.2, 2.2), (-2.0, 0.0, 1.5)),
            ((-9.0, 4.2, 2.2), (2.0, -1.0, 1.5)),
            ((0.0, -4.5, 3.0), (0.0, 2.0, 1.0)),
            ((0.0, 4.5, 3.0), (0.0, -2.0, 1.0)),
            ((-5.5, 4.0, 2.5), (-5.5, -1.5, 2.5)),
            ((-9.5, -0.5, 5.0), (0.0, 0.0, 0.5)),
            ((0.0, 0.5, 7.5), (0.5, 0.4, 0.0)),
            ((-5.0, -0.5, 7.5), (-5.4, -1.4, 0.0)),
            ((6.0, -1.0, 7.5), (6.4, 2.4, 0.0)),
            ((2.0, 2.0, 7.0), (2.5, -2.3, 0.0)),
        ]
    else:
        raise ValueError(f"no builtin scan script for scene {scene_name!r}")
    cams = [CameraModel(w, h, hfov, vfov, PoseSE3.look_at(eye, target))
            for eye, target in eyes]
    return ScanScript(cameras=cams, sigma=sigma)


# -- scene / script text files -------------------------------------------------

def _floats(tokens):
    return [float(t) for t in tokens]


def parse_scene(text: str) -> Scene:
    scene = Scene([])
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op, *rest = line.split()
        try:
            if op == "bounds":
                v = _floats(rest)
                scene.bounds_lo = np.array(v[:3])
                scene.bounds_hi = np.array(v[3:6])
            elif op == "quad":
                v = _floats(rest)
                scene.primitives.append(Quad(v[0:3], v[3:6], v[6:9]))
            elif op == "box":
                skip = rest and rest[-1] == "skip_bottom"
                v = _floats(rest[:-1] if skip else rest)
                scene.primitives.append(Box(v[0:3], v[3:6], skip_bottom=skip))
            elif op == "tri":
                v = _floats(rest)
                scene.primitives.append(Triangle(v[0:3], v[3:6], v[6:9]))
            else:
                raise ValueError(f"unknown directive {op!r}")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"scene line {lineno}: {exc}") from exc
    return scene


def parse_scan_script(text: str) -> ScanScript:
    width, height = 640, 480
    hfov, vfov = 120.0, 80.0
    sigma = 0.0
    cams: list[CameraModel] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op, *rest = line.split()
        try:
            if op == "resolution":
                width, height = int(rest[0]), int(rest[1])
            elif op == "fov":
                hfov, vfov = float(rest[0]), float(rest[1])
            elif op == "sigma":
                sigma = float(rest[0])
            elif op == "pose":
                v = _floats(rest)
                pose = PoseSE3.from_quaternion(v[3], v[4], v[5], v[6], v[0:3])
                cams.append(CameraModel(width, height, hfov, vfov, pose))
            elif op == "lookat":
                v = _floats(rest)
                cams.append(CameraModel(width, height, hfov, vfov,
                                        PoseSE3.look_at(v[0:3], v[3:6])))
            else:
                raise ValueError(f"unknown directive {op!r}")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"scan script line {lineno}: {exc}") from exc
    return ScanScript(cameras=cams, sigma=sigma)


def scene_text(name: str) -> str:
    """Serialize a builtin scene to the text grammar."""
    scene = build_scene(name)
    lines = [f"# builtin scene: {name}",
             "bounds " + " ".join(repr(float(x)) for x in
                                  np.concatenate([scene.bounds_lo, scene.bounds_hi]))]
    for prim in scene.primitives:
        if isinstance(prim, Quad):
            vals = np.concatenate([prim.origin, prim.e1, prim.e2])
            lines.append("quad " + " ".join(repr(float(x)) for x in vals))
        elif isinstance(prim, Box):
            vals = np.concatenate([prim.lo, prim.hi])
            suffix = " skip_bottom" if prim.skip_bottom else ""
            lines.append("box " + " ".join(repr(float(x)) for x in vals) + suffix)
        elif isinstance(prim, Triangle):
            vals = np.concatenate([prim.a, prim.b, prim.c])
            lines.append("tri " + " ".join(repr(float(x)) for x in vals))
    return "\n".join(lines) + "\n"
