"""Command-line entry points.

Subcommands map thinly onto the library: `run` replays a frame directory
through the pipeline, `synth` renders synthetic scenes into frame files,
`evaluate` scores a mesh against ground truth, `rasterize`/`reinforce`
work with depth images, `export` converts mesh files, and `serve` starts
the HTTP service.

Exit codes: 0 success, 2 input error, 3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTEGRITY = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scanmesh")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay frames into a mesh")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--preset", choices=["mechanical", "solid_state", "custom"])
    run.add_argument("--frames-dir", required=True)
    run.add_argument("--trajectory", help="defaults to <frames-dir>/trajectory.txt")
    run.add_argument("--out-mesh", required=True)
    run.add_argument("--mesh-format", default="ply", choices=["ply", "obj"])
    run.add_argument("--workers", type=int)
    run.add_argument("--export-every", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--report", help="write per-frame timing report JSON here")
    run.add_argument("--check-integrity", action="store_true")
    for key in ("min-vertex-spacing", "region-size", "voxel-size",
                "dilation-radius", "downsample-leaf"):
        run.add_argument(f"--{key}", type=float)

    synth = sub.add_parser("synth", help="render synthetic scans to frame files")
    synth.add_argument("--scene", required=True,
                       help="builtin name (plane_only, box_town) or scene file")
    synth.add_argument("--script", help="scan script file (default: builtin poses)")
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--resolution", default="640x480")
    synth.add_argument("--sigma", type=float, default=0.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--gt-resolution", type=float, default=0.0,
                       help="also write ground-truth points at this spacing")

    ev = sub.add_parser("evaluate", help="score a mesh against ground truth")
    ev.add_argument("--mesh", required=True)
    ev.add_argument("--scene", help="scene file or builtin name for ground truth")
    ev.add_argument("--gt-points", help="frame file with ground-truth points")
    ev.add_argument("--threshold", type=float, default=0.05)
    ev.add_argument("--resolution", type=float, default=0.01)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--report", help="write JSON report here")

    ras = sub.add_parser("rasterize", help="render a depth image from a mesh")
    ras.add_argument("--mesh", required=True)
    ras.add_argument("--out", required=True)
    ras.add_argument("--width", type=int, default=640)
    ras.add_argument("--height", type=int, default=480)
    ras.add_argument("--hfov", type=float, default=90.0)
    ras.add_argument("--vfov", type=float, default=70.0)
    ras.add_argument("--pose", default="0 0 0 0 0 0 1",
                     help="tx ty tz qx qy qz qw")
    ras.add_argument("--far", type=float, default=1.0e4)

    rei = sub.add_parser("reinforce", help="unproject a depth image to points")
    rei.add_argument("--depth", required=True)
    rei.add_argument("--out", required=True, help="points written as a frame file")
    rei.add_argument("--width", type=int, default=640)
    rei.add_argument("--height", type=int, default=480)
    rei.add_argument("--hfov", type=float, default=90.0)
    rei.add_argument("--vfov", type=float, default=70.0)
    rei.add_argument("--pose", default="0 0 0 0 0 0 1")

    exp = sub.add_parser("export", help="convert a mesh file between formats")
    exp.add_argument("--mesh", required=True)
    exp.add_argument("--out", required=True)
    exp.add_argument("--format", default="obj", choices=["ply", "obj"])
    exp.add_argument("--ascii", action="store_true")

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)

    return parser


def _parse_pose(text: str):
    from scanmesh.geometry import PoseSE3

    vals = [float(x) for x in text.split()]
    if len(vals) != 7:
        raise ValueError("pose must be 'tx ty tz qx qy qz qw'")
    return PoseSE3.from_quaternion(vals[3], vals[4], vals[5], vals[6], vals[0:3])


def _load_scene(spec: str):
    from scanmesh.synth import build_scene, parse_scene

    if Path(spec).exists():
        return parse_scene(Path(spec).read_text())
    return build_scene(spec)


def _cmd_run(args) -> int:
    from scanmesh.frameio import load_frames, read_config_file
    from scanmesh.pipeline import IntegrityFailure, RunConfig, run_pipeline

    values = read_config_file(args.config) if args.config else {}
    for key in ("preset", "workers", "export_every", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    for key in ("min_vertex_spacing", "region_size", "voxel_size",
                "dilation_radius", "downsample_leaf"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if args.check_integrity:
        values["check_integrity"] = "1"
    config = RunConfig.from_mapping(values)
    frames = load_frames(args.frames_dir, args.trajectory)
    try:
        report, _, _ = run_pipeline(config, frames, out_mesh=args.out_mesh,
                                    mesh_format=args.mesh_format)
    except IntegrityFailure as exc:
        print(f"integrity failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    if args.report:
        report.write(args.report)
    print(f"frames={len(report.frames)} vertices={report.vertex_count} "
          f"facets={report.facet_count} "
          f"meshing_mean_ms={report.meshing_mean_ms:.2f} "
          f"registration_mean_ms={report.registration_mean_ms:.2f}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    from scanmesh.frameio import write_frame, write_frames
    from scanmesh.synth import build_scan_script, parse_scan_script, render_scan

    scene = _load_scene(args.scene)
    w, h = (int(x) for x in args.resolution.lower().split("x"))
    if args.script:
        script = parse_scan_script(Path(args.script).read_text())
    else:
        script = build_scan_script(args.scene, resolution=(w, h), sigma=args.sigma)
    sigma = args.sigma if args.sigma else script.sigma
    frames = [render_scan(scene, cam, sigma=sigma, seed=args.seed,
                          scan_index=i, timestamp=float(i) * 0.1)
              for i, cam in enumerate(script.cameras)]
    write_frames(args.out_dir, frames)
    if args.gt_resolution > 0:
        gt = scene.ground_truth_points(args.gt_resolution)
        # .pts keeps it out of the frame-file glob; same binary layout
        write_frame(Path(args.out_dir) / "ground_truth.pts", gt)
    print(f"wrote {len(frames)} frames to {args.out_dir}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from scanmesh.broadcaster import load_mesh
    from scanmesh.evaluation import report_text, write_reports
    from scanmesh.frameio import read_frame
    from scanmesh.pipeline import evaluate_mesh

    vertices, faces = load_mesh(args.mesh)
    if args.gt_points:
        gt = read_frame(args.gt_points)
    elif args.scene:
        gt = _load_scene(args.scene).ground_truth_points(args.resolution)
    else:
        print("need --scene or --gt-points", file=sys.stderr)
        return EXIT_INPUT
    corr, fair = evaluate_mesh(vertices, faces, gt, threshold=args.threshold,
                               resolution=args.resolution, seed=args.seed)
    sys.stdout.write(report_text(corr))
    sys.stdout.write(report_text(fair))
    if args.report:
        write_reports(args.report, correctness=corr, fairness=fair)
    return EXIT_OK


def _snapshot_from_mesh(path: str):
    from scanmesh.broadcaster import MeshSnapshot, load_mesh

    vertices, faces = load_mesh(path)
    snap = MeshSnapshot()
    snap.vertex_ids = np.arange(vertices.shape[0], dtype=np.int64)
    snap.vertex_positions = vertices
    snap.facet_published = faces
    snap.facet_keys = np.sort(faces, axis=1)
    snap.facet_normals = np.zeros((faces.shape[0], 3))
    return snap


def _cmd_rasterize(args) -> int:
    from scanmesh.broadcaster import CameraModel, rasterize_depth
    from scanmesh.frameio import write_depth

    snap = _snapshot_from_mesh(args.mesh)
    camera = CameraModel(args.width, args.height, args.hfov, args.vfov,
                         _parse_pose(args.pose))
    image = rasterize_depth(snap, camera, far=args.far)
    write_depth(args.out, image)
    hits = int(image.hit_mask.sum())
    print(f"rasterized {args.width}x{args.height}, {hits} hit pixels")
    return EXIT_OK


def _cmd_reinforce(args) -> int:
    from scanmesh.broadcaster import CameraModel, reinforce_points
    from scanmesh.frameio import read_depth, write_frame

    camera = CameraModel(args.width, args.height, args.hfov, args.vfov,
                         _parse_pose(args.pose))
    image = read_depth(args.depth, camera)
    points = reinforce_points(image)
    write_frame(args.out, points)
    print(f"reinforced {points.shape[0]} points -> {args.out}")
    return EXIT_OK


def _cmd_export(args) -> int:
    from scanmesh.broadcaster import export_mesh

    snap = _snapshot_from_mesh(args.mesh)
    export_mesh(snap, args.out, fmt=args.format, binary=not args.ascii)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from scanmesh.service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "synth": _cmd_synth,
    "evaluate": _cmd_evaluate,
    "rasterize": _cmd_rasterize,
    "reinforce": _cmd_reinforce,
    "export": _cmd_export,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    from scanmesh.mesher import MeshIntegrityError

    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except MeshIntegrityError as exc:
        print(f"integrity failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
