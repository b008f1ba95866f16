"""Pydantic request/response models for the reconstruction service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class PoseModel(BaseModel):
    translation: list[float] = Field(default=[0.0, 0.0, 0.0],
                                     min_length=3, max_length=3)
    quaternion: list[float] = Field(default=[0.0, 0.0, 0.0, 1.0],
                                    min_length=4, max_length=4,
                                    description="qx, qy, qz, qw")


class CreateSessionRequest(BaseModel):
    preset: str = "solid_state"
    min_vertex_spacing: float | None = None
    region_size: float | None = None
    voxel_size: float | None = None
    dilation_radius: float | None = None
    downsample_leaf: float | None = None
    workers: int = 1


class SessionConfig(BaseModel):
    min_vertex_spacing: float
    region_size: float
    voxel_size: float
    dilation_radius: float
    downsample_leaf: float
    workers: int


class SessionInfo(BaseModel):
    session_id: str
    config: SessionConfig
    frames_processed: int
    vertex_count: int
    facet_count: int


class FrameRequest(BaseModel):
    timestamp: float = 0.0
    points: list[list[float]]
    pose: PoseModel = Field(default_factory=PoseModel)


class FrameResponse(BaseModel):
    frame_index: int
    appended: int
    discarded: int
    nonfinite: int
    activated_voxels: int
    facets_added: int
    facets_erased: int
    registration_ms: float
    meshing_ms: float
    vertex_count: int
    facet_count: int


class SnapshotResponse(BaseModel):
    frame_counter: int
    vertex_count: int
    facet_count: int


class CameraRequest(BaseModel):
    width: int = Field(default=640, ge=1)
    height: int = Field(default=480, ge=1)
    horizontal_fov: float = Field(default=90.0, gt=0.0, lt=180.0)
    vertical_fov: float = Field(default=70.0, gt=0.0, lt=180.0)
    pose: PoseModel = Field(default_factory=PoseModel)
    far: float = Field(default=1.0e4, gt=0.0)


class ReinforceResponse(BaseModel):
    count: int
    points: list[list[float]]


class MeshPayload(BaseModel):
    vertices: list[list[float]]
    faces: list[list[int]]


class EvaluateRequest(BaseModel):
    mesh: MeshPayload
    ground_truth: list[list[float]]
    threshold: float = 0.05
    resolution: float = 0.01
    seed: int = 0


class CorrectnessModel(BaseModel):
    accuracy: float
    completeness: float
    precision: float
    recall: float
    f_score: float
    threshold: float
    sample_resolution: float


class FairnessModel(BaseModel):
    max_min_angle_error: float
    c2se: float
    mean_max_angle_error: float
    mean_min_angle_error: float
    facet_count: int
    degenerate_count: int


class EvaluateResponse(BaseModel):
    correctness: CorrectnessModel
    fairness: FairnessModel
