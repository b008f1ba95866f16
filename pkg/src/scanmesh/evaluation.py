"""Reconstruction quality metrics: correctness and triangle fairness.

Correctness compares a point set sampled uniformly from the mesh surface
against a downsampled ground-truth cloud: mean nearest-neighbor distance
in both directions (accuracy / completeness) and the fraction of points
within a distance threshold (precision / recall / F-score, threshold
0.05 m by default).  Fairness scores triangle shape: the average error of
the max and min interior angles against 60 degrees, and the mean ratio of
circumradius to shortest edge (C2SE, lower bound 1/sqrt(3) at equilateral).

Nearest-neighbor queries are exact (shared kNN store); mesh sampling uses
per-facet seeded RNG streams so reports are reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from scanmesh.spatial import IncrementalKnnStore

DEFAULT_THRESHOLD = 0.05
DEFAULT_RESOLUTION = 0.01


@dataclass
class CorrectnessReport:
    accuracy: float
    completeness: float
    precision: float
    recall: float
    f_score: float
    threshold: float = DEFAULT_THRESHOLD
    sample_resolution: float = DEFAULT_RESOLUTION


@dataclass
class FairnessReport:
    max_min_angle_error: float   # mean of ((max-60) + (60-min))/2 per triangle
    c2se: float                  # mean circumradius / shortest edge
    mean_max_angle_error: float
    mean_min_angle_error: float
    facet_count: int
    degenerate_count: int


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_mesh_uniform(vertices: np.ndarray, faces: np.ndarray,
                        resolution: float = DEFAULT_RESOLUTION,
                        seed: int = 0) -> np.ndarray:
    """Area-proportional surface samples: ceil(area/resolution^2) per facet.

    Uniform barycentric placement with an RNG stream keyed by (seed, facet
    index), so any parallel partitioning over facets reproduces the same
    points.  Zero-area facets contribute nothing.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.shape[0] == 0:
        raise ValueError("empty mesh")
    areas = triangle_areas(vertices, faces)
    counts = np.ceil(areas / (resolution * resolution)).astype(np.int64)
    counts[areas <= 0.0] = 0
    chunks = []
    for i in np.nonzero(counts)[0]:
        rng = np.random.default_rng((seed, int(i)))
        u = rng.random(counts[i])
        v = rng.random(counts[i])
        flip = u + v > 1.0
        u[flip] = 1.0 - u[flip]
        v[flip] = 1.0 - v[flip]
        a, b, c = (vertices[faces[i, k]] for k in range(3))
        chunks.append(a + np.outer(u, b - a) + np.outer(v, c - a))
    if not chunks:
        return np.zeros((0, 3))
    return np.vstack(chunks)


def _nn_distances(queries: np.ndarray, store: IncrementalKnnStore,
                  targets: np.ndarray) -> np.ndarray:
    """Exact NN distances recomputed from the matched target point.

    The distance formula matches the brute-force reference term for term so
    the two agree bitwise, not just within tolerance.
    """
    ids = store.nearest_ids_many(queries)
    diff = queries - targets[ids]
    return np.sqrt((diff ** 2).sum(axis=1))


def correctness(sampled: np.ndarray, ground_truth: np.ndarray,
                threshold: float = DEFAULT_THRESHOLD,
                sample_resolution: float = DEFAULT_RESOLUTION) -> CorrectnessReport:
    """Accuracy/completeness/precision/recall/F-score between two point sets."""
    p = np.asarray(sampled, dtype=np.float64).reshape(-1, 3)
    q = np.asarray(ground_truth, dtype=np.float64).reshape(-1, 3)
    if p.shape[0] == 0 or q.shape[0] == 0:
        raise ValueError("empty input")
    store_q = IncrementalKnnStore.from_points(q)
    store_p = IncrementalKnnStore.from_points(p)
    d_pq = _nn_distances(p, store_q, q)
    d_qp = _nn_distances(q, store_p, p)
    precision = float(np.mean(d_pq < threshold))
    recall = float(np.mean(d_qp < threshold))
    if precision + recall > 0.0:
        f_score = 2.0 * precision * recall / (precision + recall)
    else:
        f_score = 0.0
    return CorrectnessReport(
        accuracy=float(np.mean(d_pq)),
        completeness=float(np.mean(d_qp)),
        precision=precision,
        recall=recall,
        f_score=f_score,
        threshold=threshold,
        sample_resolution=sample_resolution,
    )


def fairness(vertices: np.ndarray, faces: np.ndarray) -> FairnessReport:
    """Triangle-shape metrics over all non-degenerate facets."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.shape[0] == 0:
        raise ValueError("empty mesh")
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    la = np.linalg.norm(b - c, axis=1)   # edge opposite vertex a
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    good = (area > 1e-14) & (la > 0) & (lb > 0) & (lc > 0)
    degenerate = int(faces.shape[0] - good.sum())
    if not good.any():
        raise ValueError("all facets degenerate")
    la, lb, lc, area = la[good], lb[good], lc[good], area[good]

    def angle(opposite, e1, e2):
        cosv = (e1 * e1 + e2 * e2 - opposite * opposite) / (2.0 * e1 * e2)
        return np.degrees(np.arccos(np.clip(cosv, -1.0, 1.0)))

    ang_a = angle(la, lb, lc)
    ang_b = angle(lb, la, lc)
    ang_c = 180.0 - ang_a - ang_b
    angles = np.stack([ang_a, ang_b, ang_c], axis=1)
    amax = angles.max(axis=1)
    amin = angles.min(axis=1)
    max_err = amax - 60.0
    min_err = 60.0 - amin
    circumradius = (la * lb * lc) / (4.0 * area)
    c2se = circumradius / np.minimum(np.minimum(la, lb), lc)
    return FairnessReport(
        max_min_angle_error=float(np.mean((max_err + min_err) / 2.0)),
        c2se=float(np.mean(c2se)),
        mean_max_angle_error=float(np.mean(max_err)),
        mean_min_angle_error=float(np.mean(min_err)),
        facet_count=int(faces.shape[0]),
        degenerate_count=degenerate,
    )


def per_facet_c2se(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Circumradius / shortest-edge ratio of each non-degenerate facet."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    good = area > 1e-14
    r = (la[good] * lb[good] * lc[good]) / (4.0 * area[good])
    return r / np.minimum(np.minimum(la[good], lb[good]), lc[good])


def downsample_grid(points: np.ndarray, leaf: float) -> np.ndarray:
    """One centroid per occupied floor-grid cell of side `leaf`."""
    if leaf <= 0:
        raise ValueError("leaf size must be positive")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        return pts
    keys = np.floor(pts / leaf).astype(np.int64)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    keys = keys[order]
    pts = pts[order]
    boundaries = np.nonzero(np.any(np.diff(keys, axis=0) != 0, axis=1))[0] + 1
    starts = np.concatenate([[0], boundaries])
    sums = np.add.reduceat(pts, starts, axis=0)
    counts = np.diff(np.concatenate([starts, [pts.shape[0]]]))
    return sums / counts[:, None]


def report_text(report) -> str:
    """Flat key=value block for a dataclass report."""
    lines = [f"{k} = {v}" for k, v in asdict(report).items()]
    return "\n".join(lines) + "\n"


def write_reports(path: str, **reports) -> None:
    """Write reports as one JSON document keyed by report name."""
    payload = {name: asdict(rep) for name, rep in reports.items()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
