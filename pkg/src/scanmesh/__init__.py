"""Incremental triangle-mesh reconstruction from streaming posed LiDAR scans.

The engine keeps a voxel/region hash map of mesh vertices and triangle
facets, re-triangulates activated voxels on a local 2D plane each scan,
and reconciles the result against the stored mesh with pull/commit/push
deltas.  A broadcaster snapshots the mesh for export, depth rasterization
and point reinforcement; an evaluation suite scores reconstructions
against ground truth.
"""

from scanmesh.geometry import PoseSE3, PlaneStats, eig_sym3, transform_points
from scanmesh.map import MapConfig, MeshMap, RegistrationReport, ScanFrame
from scanmesh.mesher import mesh_update
from scanmesh.broadcaster import Broadcaster, CameraModel

__all__ = [
    "PoseSE3",
    "PlaneStats",
    "eig_sym3",
    "transform_points",
    "MapConfig",
    "MeshMap",
    "RegistrationReport",
    "ScanFrame",
    "mesh_update",
    "Broadcaster",
    "CameraModel",
]

__version__ = "0.1.0"
