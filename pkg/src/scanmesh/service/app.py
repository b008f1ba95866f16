"""HTTP surface over live reconstruction sessions.

Frames stream in as JSON; meshes come back as PLY/OBJ downloads, depth
images in the PF32 binary format, reinforcement and evaluation as JSON.
"""

from __future__ import annotations

import io

import numpy as np
from fastapi import FastAPI, HTTPException, Response

from scanmesh import __version__
from scanmesh.broadcaster import CameraModel, rasterize_depth, reinforce_points, serialize_mesh
from scanmesh.geometry import PoseSE3
from scanmesh.map import MapConfig
from scanmesh.pipeline import evaluate_mesh
from scanmesh.service import models
from scanmesh.service.sessions import SessionManager, SessionNotFound


def _pose_from_model(pose: models.PoseModel) -> PoseSE3:
    qx, qy, qz, qw = pose.quaternion
    return PoseSE3.from_quaternion(qx, qy, qz, qw, pose.translation)


def create_app(manager: SessionManager | None = None) -> FastAPI:
    app = FastAPI(title="scanmesh", version=__version__)
    sessions = manager or SessionManager()
    app.state.sessions = sessions

    def _session(session_id: str):
        try:
            return sessions.get(session_id)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", response_model=models.SessionInfo)
    def create_session(req: models.CreateSessionRequest):
        overrides = {k: v for k, v in (
            ("min_vertex_spacing", req.min_vertex_spacing),
            ("region_size", req.region_size),
            ("voxel_size", req.voxel_size),
            ("dilation_radius", req.dilation_radius),
            ("downsample_leaf", req.downsample_leaf),
        ) if v is not None}
        try:
            if req.preset == "custom":
                config = MapConfig(**overrides)
            else:
                config = MapConfig.preset(req.preset, **overrides)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session = sessions.create(config, workers=req.workers)
        return session.stats()

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": sessions.list_ids()}

    @app.get("/sessions/{session_id}", response_model=models.SessionInfo)
    def session_info(session_id: str):
        return _session(session_id).stats()

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        try:
            sessions.drop(session_id)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return {"deleted": session_id}

    @app.post("/sessions/{session_id}/frames", response_model=models.FrameResponse)
    def add_frame(session_id: str, req: models.FrameRequest):
        session = _session(session_id)
        points = np.asarray(req.points, dtype=np.float64)
        if points.size and (points.ndim != 2 or points.shape[1] != 3):
            raise HTTPException(status_code=422, detail="points must be Nx3")
        try:
            pose = _pose_from_model(req.pose)
            return session.add_frame(req.timestamp, points.reshape(-1, 3), pose)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/sessions/{session_id}/snapshot", response_model=models.SnapshotResponse)
    def snapshot(session_id: str):
        snap = _session(session_id).snapshot()
        return {
            "frame_counter": snap.frame_counter,
            "vertex_count": snap.vertex_count,
            "facet_count": snap.facet_count,
        }

    @app.get("/sessions/{session_id}/mesh")
    def mesh(session_id: str, format: str = "ply", binary: bool = True):
        session = _session(session_id)
        snap = session.snapshot()
        try:
            payload, _ = serialize_mesh(snap, fmt=format, binary=binary)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        media = "application/octet-stream" if binary and format == "ply" else "text/plain"
        return Response(content=payload, media_type=media, headers={
            "Content-Disposition": f"attachment; filename=mesh.{format.lower()}"})

    @app.post("/sessions/{session_id}/depth")
    def depth(session_id: str, req: models.CameraRequest):
        from scanmesh.frameio import DEPTH_MAGIC  # local to avoid cycle at import

        session = _session(session_id)
        snap = session.snapshot()
        camera = CameraModel(req.width, req.height, req.horizontal_fov,
                             req.vertical_fov, _pose_from_model(req.pose))
        image = rasterize_depth(snap, camera, far=req.far)
        buf = io.BytesIO()
        buf.write(DEPTH_MAGIC + b"\n")
        buf.write(f"{req.width} {req.height}\n".encode())
        buf.write(f"{image.far!r}\n".encode())
        buf.write(np.ascontiguousarray(image.data, dtype="<f4").tobytes())
        return Response(content=buf.getvalue(), media_type="application/octet-stream")

    @app.post("/sessions/{session_id}/reinforce",
              response_model=models.ReinforceResponse)
    def reinforce(session_id: str, req: models.CameraRequest):
        session = _session(session_id)
        snap = session.snapshot()
        camera = CameraModel(req.width, req.height, req.horizontal_fov,
                             req.vertical_fov, _pose_from_model(req.pose))
        points = reinforce_points(rasterize_depth(snap, camera, far=req.far))
        return {"count": int(points.shape[0]), "points": points.tolist()}

    @app.post("/evaluate", response_model=models.EvaluateResponse)
    def evaluate(req: models.EvaluateRequest):
        vertices = np.asarray(req.mesh.vertices, dtype=np.float64)
        faces = np.asarray(req.mesh.faces, dtype=np.int64)
        gt = np.asarray(req.ground_truth, dtype=np.float64)
        try:
            corr, fair = evaluate_mesh(vertices, faces, gt,
                                       threshold=req.threshold,
                                       resolution=req.resolution, seed=req.seed)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"correctness": corr.__dict__, "fairness": fair.__dict__}

    return app


app = create_app()
