"""Core geometric types: 3D points, SE(3) poses, plane statistics.

Points are plain float64 numpy arrays of shape (3,) (or (N, 3) in batch
form).  All operations here are pure functions on value types and safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-9


def point3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def is_finite_point(p: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(p)))


class PoseSE3:
    """Rigid transform (R, t): p_world = R @ p + t.

    The rotation must be orthonormal with determinant +1 within 1e-9.
    """

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation: np.ndarray, translation: np.ndarray):
        self.rotation = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(translation, dtype=np.float64).reshape(3)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_quaternion(cls, qx: float, qy: float, qz: float, qw: float,
                        translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        """Build from a unit quaternion in (qx, qy, qz, qw) order."""
        norm = np.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
        if norm < 1e-12:
            raise ValueError("zero-norm quaternion")
        qx, qy, qz, qw = qx / norm, qy / norm, qz / norm, qw / norm
        rot = np.array([
            [1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)],
            [2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)],
            [2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)],
        ])
        return cls(rot, np.asarray(translation, dtype=np.float64))

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)) -> "PoseSE3":
        """Camera-style pose at `eye` with +z toward `target`, +x right, +y down."""
        eye = np.asarray(eye, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - eye
        nf = np.linalg.norm(fwd)
        if nf < 1e-12:
            raise ValueError("look_at target coincides with eye")
        fwd = fwd / nf
        up = np.asarray(up, dtype=np.float64)
        right = np.cross(fwd, up)
        nr = np.linalg.norm(right)
        if nr < 1e-9:
            # forward is parallel to up; pick an arbitrary perpendicular
            alt = np.array([1.0, 0.0, 0.0]) if abs(fwd[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
            right = np.cross(fwd, alt)
            nr = np.linalg.norm(right)
        right = right / nr
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd], axis=1)
        return cls(rot, eye)

    def is_valid(self, tol: float = ORTHONORMAL_TOL) -> bool:
        r = self.rotation
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(self.translation)):
            return False
        if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
            return False
        return abs(np.linalg.det(r) - 1.0) <= tol

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) batch to the target frame."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "PoseSE3":
        rt = self.rotation.T
        return PoseSE3(rt, -(rt @ self.translation))

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        return PoseSE3(self.rotation @ other.rotation,
                       self.rotation @ other.translation + self.translation)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def as_quaternion(self) -> np.ndarray:
        """Unit quaternion (qx, qy, qz, qw) of the rotation, qw >= 0."""
        r = self.rotation
        t = np.trace(r)
        if t > 0:
            s = np.sqrt(t + 1.0) * 2.0
            qw = 0.25 * s
            qx = (r[2, 1] - r[1, 2]) / s
            qy = (r[0, 2] - r[2, 0]) / s
            qz = (r[1, 0] - r[0, 1]) / s
        elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
            s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
            qw = (r[2, 1] - r[1, 2]) / s
            qx = 0.25 * s
            qy = (r[0, 1] + r[1, 0]) / s
            qz = (r[0, 2] + r[2, 0]) / s
        elif r[1, 1] > r[2, 2]:
            s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
            qw = (r[0, 2] - r[2, 0]) / s
            qx = (r[0, 1] + r[1, 0]) / s
            qy = 0.25 * s
            qz = (r[1, 2] + r[2, 1]) / s
        else:
            s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
            qw = (r[1, 0] - r[0, 1]) / s
            qx = (r[0, 2] + r[2, 0]) / s
            qy = (r[1, 2] + r[2, 1]) / s
            qz = 0.25 * s
        q = np.array([qx, qy, qz, qw])
        if qw < 0:
            q = -q
        return q / np.linalg.norm(q)

    def __repr__(self) -> str:
        return f"PoseSE3(t={self.translation.tolist()})"


def transform_point(pose: PoseSE3, p: np.ndarray) -> np.ndarray:
    return pose.apply(p)


def transform_points(pose: PoseSE3, points: np.ndarray) -> np.ndarray:
    return pose.apply(points)


def _fix_eigvec_signs(vecs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip each column so its first non-negligible component is positive."""
    out = vecs.copy()
    for i in range(out.shape[1]):
        col = out[:, i]
        for c in col:
            if abs(c) > tol:
                if c < 0:
                    out[:, i] = -col
                break
    return out


def eig_sym3(a: np.ndarray, sym_tol: float = 1e-9):
    """Eigendecomposition of a symmetric 3x3 matrix.

    Returns (eigenvalues sorted descending, eigenvectors as columns) with a
    deterministic sign convention.  Repeated eigenvalues return some valid
    orthonormal basis of the eigenspace.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (3, 3):
        raise ValueError("eig_sym3 expects a 3x3 matrix")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > sym_tol * scale:
        raise ValueError("matrix not symmetric within tolerance")
    w, v = np.linalg.eigh((a + a.T) * 0.5)
    order = np.argsort(w)[::-1]
    return w[order], _fix_eigvec_signs(v[:, order])


@dataclass
class PlaneStats:
    """Running mean/covariance of a voxel's points with cached eigenstructure.

    Keeps the raw sums (count, sum_p, sum_ppT) so incremental updates match a
    batch recomputation to floating-point accuracy.  With count == 0 the mean
    and covariance are zero by convention.
    """

    count: int = 0
    sum_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sum_ppt: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eigenvectors: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def from_points(cls, points: np.ndarray) -> "PlaneStats":
        stats = cls()
        stats.update(points)
        return stats

    def update(self, new_points: np.ndarray) -> "PlaneStats":
        """Fold new points into the running statistics; refreshes eigenvectors."""
        pts = np.asarray(new_points, dtype=np.float64)
        if pts.size == 0:
            return self
        pts = pts.reshape(-1, 3)
        self.count += pts.shape[0]
        self.sum_p = self.sum_p + pts.sum(axis=0)
        self.sum_ppt = self.sum_ppt + pts.T @ pts
        self._refresh()
        return self

    def _refresh(self) -> None:
        n = self.count
        if n == 0:
            self.mean = np.zeros(3)
            self.covariance = np.zeros((3, 3))
            self.eigenvalues = np.zeros(3)
            self.eigenvectors = np.eye(3)
            return
        self.mean = self.sum_p / n
        cov = self.sum_ppt / n - np.outer(self.mean, self.mean)
        self.covariance = (cov + cov.T) * 0.5
        self.eigenvalues, self.eigenvectors = eig_sym3(self.covariance)

    @property
    def normal(self) -> np.ndarray:
        """Plane normal: eigenvector of the smallest eigenvalue."""
        return self.eigenvectors[:, 2]
