"""Live reconstruction sessions held by the service process.

A session owns one MeshMap plus its broadcaster.  All map mutations
(frame ingestion, snapshot sync) happen under the session lock, honoring
the single-writer contract; snapshot consumers (export, rasterize,
reinforce) work on immutable copies outside the lock.
"""

from __future__ import annotations

import threading
import time
import uuid

import numpy as np

from scanmesh.broadcaster import Broadcaster, MeshSnapshot
from scanmesh.geometry import PoseSE3
from scanmesh.map import MapConfig, MeshMap, ScanFrame
from scanmesh.mesher import mesh_update


class SessionNotFound(KeyError):
    pass


class Session:
    def __init__(self, config: MapConfig, workers: int = 1):
        self.id = uuid.uuid4().hex[:12]
        self.map = MeshMap(config)
        self.broadcaster = Broadcaster()
        self.workers = workers
        self.frames_processed = 0
        self.lock = threading.Lock()

    def add_frame(self, timestamp: float, points: np.ndarray, pose: PoseSE3) -> dict:
        with self.lock:
            t0 = time.perf_counter()
            reg = self.map.register_scan(ScanFrame(timestamp, points, pose))
            t1 = time.perf_counter()
            mu = mesh_update(self.map, reg.activated_voxel_keys,
                             sensor_pos=pose.translation, workers=self.workers)
            t2 = time.perf_counter()
            index = self.frames_processed
            self.frames_processed += 1
        return {
            "frame_index": index,
            "appended": len(reg.appended_vertex_ids),
            "discarded": reg.discarded_count,
            "nonfinite": reg.nonfinite_count,
            "activated_voxels": len(reg.activated_voxel_keys),
            "facets_added": mu.added_count,
            "facets_erased": mu.erased_count,
            "registration_ms": (t1 - t0) * 1e3,
            "meshing_ms": (t2 - t1) * 1e3,
            "vertex_count": len(self.map.vertices),
            "facet_count": len(self.map.facets),
        }

    def snapshot(self) -> MeshSnapshot:
        with self.lock:
            return self.broadcaster.sync(self.map)

    def stats(self) -> dict:
        cfg = self.map.config
        return {
            "session_id": self.id,
            "config": {
                "min_vertex_spacing": cfg.min_vertex_spacing,
                "region_size": cfg.region_size,
                "voxel_size": cfg.voxel_size,
                "dilation_radius": cfg.dilation_radius,
                "downsample_leaf": cfg.downsample_leaf,
                "workers": self.workers,
            },
            "frames_processed": self.frames_processed,
            "vertex_count": len(self.map.vertices),
            "facet_count": len(self.map.facets),
        }


class SessionManager:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, config: MapConfig, workers: int = 1) -> Session:
        session = Session(config, workers)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def drop(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise SessionNotFound(session_id)
            del self._sessions[session_id]

    def list_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)
