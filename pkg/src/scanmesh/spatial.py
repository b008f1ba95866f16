"""Spatial hashing and the incremental exact nearest-neighbor store.

Grid keys are floor(coordinate / cell_size) integer triples.  The hash
combiner is ((xi*p1) XOR (yi*p2) XOR (zi*p3)) mod n with 64-bit two's
complement wrap-around on the products; collisions are resolved by
full-key equality inside buckets, so lookups never depend on hash
uniqueness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class HashParams:
    p1: int = 116101
    p2: int = 37199
    p3: int = 93911
    n: int = 201326611


DEFAULT_HASH_PARAMS = HashParams()


class GridKey(NamedTuple):
    xi: int
    yi: int
    zi: int
    scale: float

    def cell_min(self) -> np.ndarray:
        return np.array([self.xi, self.yi, self.zi], dtype=np.float64) * self.scale

    def contains(self, p: np.ndarray) -> bool:
        lo = self.cell_min()
        hi = lo + self.scale
        return bool(np.all(p >= lo) and np.all(p < hi))


def grid_key(p: np.ndarray, scale: float) -> GridKey:
    """Integer cell coordinates of the axis-aligned grid cell containing p."""
    if scale <= 0:
        raise ValueError("cell scale must be positive")
    return GridKey(math.floor(p[0] / scale), math.floor(p[1] / scale),
                   math.floor(p[2] / scale), scale)


def grid_keys(points: np.ndarray, scale: float) -> np.ndarray:
    """Batch form of grid_key: (N, 3) points -> (N, 3) int64 cell coords."""
    if scale <= 0:
        raise ValueError("cell scale must be positive")
    return np.floor(np.asarray(points, dtype=np.float64) / scale).astype(np.int64)


def int_hash(xi: int, yi: int, zi: int, params: HashParams = DEFAULT_HASH_PARAMS) -> int:
    """Prime-XOR-mod combiner over an integer triple, result in [0, n)."""
    h = ((xi * params.p1) & MASK64) ^ ((yi * params.p2) & MASK64) ^ ((zi * params.p3) & MASK64)
    return h % params.n


def hash_key(key, params: HashParams = DEFAULT_HASH_PARAMS) -> int:
    return int_hash(key[0], key[1], key[2], params)


def triangle_key(ids, params: HashParams = DEFAULT_HASH_PARAMS) -> int:
    """Combiner applied to a sorted vertex-id triple of a facet."""
    i, j, k = ids
    if not (i < j < k):
        raise ValueError(f"facet ids must be strictly increasing, got {ids!r}")
    return int_hash(i, j, k, params)


class SpatialHashTable:
    """Bucketed hash map keyed by integer triples (grid keys or id triples).

    Buckets are selected by the prime-XOR-mod combiner; entries inside a
    bucket are matched by full-key equality, as with an unordered_map.
    """

    def __init__(self, params: HashParams = DEFAULT_HASH_PARAMS):
        self.params = params
        self._buckets: dict[int, list] = {}
        self._count = 0

    def _key_triple(self, key) -> tuple:
        return (key[0], key[1], key[2])

    def put(self, key, value) -> None:
        h = int_hash(key[0], key[1], key[2], self.params)
        bucket = self._buckets.setdefault(h, [])
        for i, (k, _) in enumerate(bucket):
            if k == key:
                bucket[i] = (key, value)
                return
        bucket.append((key, value))
        self._count += 1

    def get(self, key, default=None):
        bucket = self._buckets.get(int_hash(key[0], key[1], key[2], self.params))
        if bucket:
            for k, v in bucket:
                if k == key:
                    return v
        return default

    def remove(self, key) -> None:
        h = int_hash(key[0], key[1], key[2], self.params)
        bucket = self._buckets.get(h)
        if bucket:
            for i, (k, _) in enumerate(bucket):
                if k == key:
                    bucket.pop(i)
                    self._count -= 1
                    if not bucket:
                        del self._buckets[h]
                    return
        raise KeyError(key)

    def __contains__(self, key) -> bool:
        sentinel = object()
        return self.get(key, sentinel) is not sentinel

    def __getitem__(self, key):
        sentinel = object()
        value = self.get(key, sentinel)
        if value is sentinel:
            raise KeyError(key)
        return value

    def __setitem__(self, key, value) -> None:
        self.put(key, value)

    def __delitem__(self, key) -> None:
        self.remove(key)

    def __len__(self) -> int:
        return self._count

    def items(self) -> Iterator[tuple]:
        for bucket in self._buckets.values():
            yield from bucket

    def keys(self) -> Iterator:
        for k, _ in self.items():
            yield k

    def values(self) -> Iterator:
        for _, v in self.items():
            yield v


class IncrementalKnnStore:
    """Exact nearest-neighbor / radius search over incrementally added points.

    A kd-tree over the already-consolidated points plus a small pending
    buffer; the tree is rebuilt only when the buffer grows past a fraction
    of the total (amortized incremental insertion).  Queries are exact.
    """

    def __init__(self, rebuild_min: int = 256, rebuild_fraction: float = 0.25):
        self._ids: list[int] = []
        self._points = np.empty((0, 3), dtype=np.float64)
        self._tree: cKDTree | None = None
        self._pending_ids: list[int] = []
        self._pending: list[np.ndarray] = []
        self._rebuild_min = rebuild_min
        self._rebuild_fraction = rebuild_fraction
        self.consolidations = 0       # internal rebalances, for observability

    def __len__(self) -> int:
        return len(self._ids) + len(self._pending_ids)

    @classmethod
    def from_points(cls, points: np.ndarray) -> "IncrementalKnnStore":
        """Bulk-build a store over points indexed 0..N-1, consolidated once."""
        store = cls()
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        store._points = pts.copy()
        store._ids = list(range(pts.shape[0]))
        if pts.shape[0]:
            store._tree = cKDTree(store._points)
        return store

    def insert(self, vid: int, p: np.ndarray) -> None:
        self._pending_ids.append(vid)
        self._pending.append(np.asarray(p, dtype=np.float64))
        if len(self._pending) > max(self._rebuild_min,
                                    int(self._rebuild_fraction * len(self._ids))):
            self._consolidate()

    def extend(self, ids, points) -> None:
        for vid, p in zip(ids, points):
            self._pending_ids.append(int(vid))
            self._pending.append(np.asarray(p, dtype=np.float64))
        if len(self._pending) > max(self._rebuild_min,
                                    int(self._rebuild_fraction * len(self._ids))):
            self._consolidate()

    def _consolidate(self) -> None:
        if not self._pending:
            return
        self._points = np.vstack([self._points, np.array(self._pending)])
        self._ids.extend(self._pending_ids)
        self._pending = []
        self._pending_ids = []
        self._tree = cKDTree(self._points)
        self.consolidations += 1

    def nearest(self, p: np.ndarray) -> tuple[int, float]:
        """Id and Euclidean distance of the closest stored point to p."""
        if len(self) == 0:
            raise LookupError("nearest query on empty store")
        p = np.asarray(p, dtype=np.float64)
        best_id, best_d = -1, np.inf
        if self._tree is not None:
            d, idx = self._tree.query(p)
            best_id, best_d = self._ids[int(idx)], float(d)
        for vid, q in zip(self._pending_ids, self._pending):
            d = float(np.linalg.norm(q - p))
            if d < best_d:
                best_id, best_d = vid, d
        return best_id, best_d

    def nearest_many(self, points: np.ndarray) -> np.ndarray:
        """Distances from each query point to its nearest stored point."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(self) == 0:
            raise LookupError("nearest query on empty store")
        if self._tree is not None:
            par = -1 if points.shape[0] >= 4096 else 1
            dists, _ = self._tree.query(points, workers=par)
            dists = np.asarray(dists, dtype=np.float64)
        else:
            dists = np.full(points.shape[0], np.inf)
        if self._pending:
            pend = np.array(self._pending)
            d2 = np.sum((points[:, None, :] - pend[None, :, :]) ** 2, axis=2)
            dists = np.minimum(dists, np.sqrt(d2.min(axis=1)))
        return dists

    def nearest_ids_many(self, points: np.ndarray) -> np.ndarray:
        """Id of the nearest stored point for each query point."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(self) == 0:
            raise LookupError("nearest query on empty store")
        if self._tree is not None:
            par = -1 if points.shape[0] >= 4096 else 1
            dists, idx = self._tree.query(points, workers=par)
            best = np.array([self._ids[int(i)] for i in idx], dtype=np.int64)
            best_d = np.asarray(dists, dtype=np.float64)
        else:
            best = np.full(points.shape[0], -1, dtype=np.int64)
            best_d = np.full(points.shape[0], np.inf)
        if self._pending:
            pend = np.array(self._pending)
            d2 = np.sum((points[:, None, :] - pend[None, :, :]) ** 2, axis=2)
            j = d2.argmin(axis=1)
            dp = np.sqrt(d2[np.arange(points.shape[0]), j])
            better = dp < best_d
            pend_ids = np.array(self._pending_ids, dtype=np.int64)
            best[better] = pend_ids[j[better]]
        return best

    def radius(self, p: np.ndarray, r: float) -> list[int]:
        """Ids of all stored points within Euclidean distance <= r of p."""
        p = np.asarray(p, dtype=np.float64)
        out: list[int] = []
        if self._tree is not None:
            for idx in self._tree.query_ball_point(p, r):
                out.append(self._ids[int(idx)])
        for vid, q in zip(self._pending_ids, self._pending):
            if np.linalg.norm(q - p) <= r:
                out.append(vid)
        return out

    def radius_many(self, points: np.ndarray, r: float) -> list[list[int]]:
        """Batched radius search; one id list per query point."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        results: list[list[int]] = [[] for _ in range(points.shape[0])]
        if self._tree is not None:
            # thread fan-out only pays off for large batches
            par = -1 if points.shape[0] >= 4096 else 1
            balls = self._tree.query_ball_point(points, r, workers=par)
            for i, ball in enumerate(balls):
                results[i].extend(self._ids[int(j)] for j in ball)
        if self._pending:
            pend = np.array(self._pending)
            d2 = np.sum((points[:, None, :] - pend[None, :, :]) ** 2, axis=2)
            hit = d2 <= r * r
            for i in range(points.shape[0]):
                for j in np.nonzero(hit[i])[0]:
                    results[i].append(self._pending_ids[int(j)])
        return results
