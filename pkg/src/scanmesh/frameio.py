"""File formats for frames, trajectories, configs, and depth images.

Frame file (one per scan): little-endian binary, uint32 point count then
float64 xyz triples in the sensor frame.  Trajectory: text lines
"timestamp tx ty tz qx qy qz qw", one per frame, timestamps strictly
increasing.  Config: flat "key = value" text.  Depth image: header lines
b"PF32", "<width> <height>", "<far>" then row-major float32 little-endian
payload where 0.0 means no hit.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from scanmesh.broadcaster import CameraModel, DepthImage
from scanmesh.geometry import PoseSE3
from scanmesh.map import ScanFrame

FRAME_SUFFIX = ".bin"


def write_frame(path, points: np.ndarray) -> None:
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", pts.shape[0]))
        fh.write(pts.astype("<f8").tobytes())


def read_frame(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read(4)
        if len(raw) != 4:
            raise ValueError(f"{path}: truncated frame header")
        (count,) = struct.unpack("<I", raw)
        data = fh.read(count * 24)
        if len(data) != count * 24:
            raise ValueError(f"{path}: expected {count} points, file truncated")
        return np.frombuffer(data, dtype="<f8").reshape(count, 3).copy()


def write_trajectory(path, entries) -> None:
    """entries: iterable of (timestamp, PoseSE3)."""
    with open(path, "w") as fh:
        for ts, pose in entries:
            vals = [ts, *pose.translation, *pose.as_quaternion()]
            fh.write(" ".join(repr(float(v)) for v in vals) + "\n")


def read_trajectory(path) -> list[tuple[float, PoseSE3]]:
    entries: list[tuple[float, PoseSE3]] = []
    last_ts = -np.inf
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            vals = [float(x) for x in line.split()]
            if len(vals) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 fields, got {len(vals)}")
            ts, tx, ty, tz, qx, qy, qz, qw = vals
            if ts <= last_ts:
                raise ValueError(f"{path}:{lineno}: timestamps must strictly increase")
            last_ts = ts
            entries.append((ts, PoseSE3.from_quaternion(qx, qy, qz, qw, (tx, ty, tz))))
    return entries


def frame_paths(frames_dir) -> list[Path]:
    d = Path(frames_dir)
    return sorted(p for p in d.iterdir() if p.suffix == FRAME_SUFFIX)


def write_frames(frames_dir, frames) -> None:
    """Write ScanFrames as frame files plus trajectory.txt in frames_dir."""
    d = Path(frames_dir)
    os.makedirs(d, exist_ok=True)
    entries = []
    for i, frame in enumerate(frames):
        write_frame(d / f"frame_{i:06d}{FRAME_SUFFIX}", frame.points)
        entries.append((frame.timestamp, frame.pose))
    write_trajectory(d / "trajectory.txt", entries)


def load_frames(frames_dir, trajectory_path=None):
    """Yield ScanFrames pairing frame files (sorted) with trajectory rows."""
    d = Path(frames_dir)
    traj_path = Path(trajectory_path) if trajectory_path else d / "trajectory.txt"
    entries = read_trajectory(traj_path)
    paths = frame_paths(d)
    if len(paths) != len(entries):
        raise ValueError(
            f"{len(paths)} frame files but {len(entries)} trajectory rows")
    for path, (ts, pose) in zip(paths, entries):
        yield ScanFrame(timestamp=ts, points=read_frame(path), pose=pose)


# -- flat key = value config ----------------------------------------------------

def read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def write_config_file(path, values: dict) -> None:
    with open(path, "w") as fh:
        for key, val in values.items():
            fh.write(f"{key} = {val}\n")


# -- depth image files -----------------------------------------------------------

DEPTH_MAGIC = b"PF32"


def write_depth(path, depth: DepthImage) -> None:
    h, w = depth.data.shape
    with open(path, "wb") as fh:
        fh.write(DEPTH_MAGIC + b"\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(f"{float(depth.far)!r}\n".encode())
        fh.write(np.ascontiguousarray(depth.data, dtype="<f4").tobytes())


def read_depth(path, camera: CameraModel | None = None) -> DepthImage:
    with open(path, "rb") as fh:
        if fh.readline().strip() != DEPTH_MAGIC:
            raise ValueError(f"{path}: not a depth image file")
        w, h = (int(x) for x in fh.readline().split())
        far = float(fh.readline())
        data = np.frombuffer(fh.read(w * h * 4), dtype="<f4").reshape(h, w)
    if camera is None:
        camera = CameraModel(w, h, 90.0, 90.0)
    return DepthImage(data.astype(np.float64), camera, far)
