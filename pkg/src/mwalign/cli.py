"""Command-line front end: ``mwalign {align,eval,normals,info}``.

Exit codes: 0 success, 1 usage / parse / I/O error, 2 alignment failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AlignmentError, EmptyGeometry, MWAlignError
from .evaluation import DEFAULT_TRIALS, MAX_TILT_DEG, EvalConfig, export_csv, run_evaluation, summary_table
from .geometry import FrameConfig
from .geometry_io import (
    DEFAULT_K,
    DEFAULT_SUBSAMPLE_CELL,
    PointCloud,
    TriangleMesh,
    estimate_normals,
    grid_subsample,
    load_geometry,
    save_geometry,
    to_samples,
)
from .horizontal import list_manhattan_frames
from .pipeline import AlignmentConfig, apply_rotation, normalize_pose, write_report

log = logging.getLogger("mwalign")

EXIT_OK, EXIT_USAGE, EXIT_ALIGN = 0, 1, 2

# flag defaults; test_cli asserts these against the method constants
DEFAULTS = {
    "resolution_h": 1.0,
    "resolution_v": 1.0,
    "threshold": 0.75,
    "window_h": 5.0,
    "window_v": 5.0,
    "trials": DEFAULT_TRIALS,
    "max_tilt": MAX_TILT_DEG,
    "k": DEFAULT_K,
    "cell": DEFAULT_SUBSAMPLE_CELL,
    "seed": 0,
    "threads": 1,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _add_alignment_flags(p):
    g = p.add_argument_group("alignment")
    g.add_argument("--z-axis", nargs=3, type=float, default=[0.0, 0.0, 1.0], metavar=("X", "Y", "Z"),
                   help="vertical axis of the target frame (default: 0 0 1)")
    g.add_argument("--x-axis", nargs=3, type=float, default=[1.0, 0.0, 0.0], metavar=("X", "Y", "Z"),
                   help="horizontal reference axis, orthogonal to --z-axis (default: 1 0 0)")
    g.add_argument("--resolution-h", type=float, default=DEFAULTS["resolution_h"],
                   help="horizontal histogram cell size in degrees (default: %(default)s)")
    g.add_argument("--resolution-v", type=float, default=DEFAULTS["resolution_v"],
                   help="azimuth/inclination grid cell size in degrees (default: %(default)s)")
    g.add_argument("--threshold", type=float, default=DEFAULTS["threshold"],
                   help="peak threshold as a fraction of the maximum cell (default: %(default)s)")
    g.add_argument("--window-h", type=float, default=DEFAULTS["window_h"],
                   help="horizontal median refinement window in degrees (default: %(default)s)")
    g.add_argument("--window-v", type=float, default=DEFAULTS["window_v"],
                   help="vertical median refinement window in degrees (default: %(default)s)")
    g.add_argument("--no-vertical", action="store_true",
                   help="skip leveling (data is already level)")
    g.add_argument("--deterministic", action="store_true",
                   help="single-threaded, timings recorded as 0 for byte-identical outputs")
    g.add_argument("--threads", type=int, default=DEFAULTS["threads"],
                   help="worker threads, 0 = all cores (default: %(default)s)")
    g.add_argument("-k", "--k", dest="k", type=int, default=DEFAULTS["k"],
                   help="neighbors for normal estimation when a cloud has none (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mwalign", description="Manhattan-World pose normalization of indoor point clouds and meshes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="{align,eval,normals,info}", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("align", help="align a dataset with the coordinate axes")
    p.add_argument("input", help="PLY or OBJ file")
    p.add_argument("-o", "--output", required=True, help="aligned geometry (PLY or OBJ)")
    p.add_argument("--report", help="JSON report path (default: OUTPUT with .json suffix)")
    p.add_argument("--canonicalize", action="store_true", help="resolve the 90-degree ambiguity")
    p.add_argument("--histogram-csv", help="write the folded horizontal histogram")
    p.add_argument("--sphere-csv", help="write the folded azimuth/inclination grid")
    p.add_argument("--frames", action="store_true", help="list all detected Manhattan frames")
    p.add_argument("--double", action="store_true", help="write 64-bit PLY coordinates")
    _add_alignment_flags(p)

    p = sub.add_parser("eval", help="randomized-rotation evaluation of a dataset in ground-truth pose")
    p.add_argument("input", help="PLY or OBJ file in ground-truth pose")
    p.add_argument("--csv", help="per-trial CSV output")
    p.add_argument("--name", help="dataset name in the summary (default: file stem)")
    p.add_argument("--trials", type=_positive_int, default=DEFAULTS["trials"],
                   help="number of random rotations (default: %(default)s)")
    p.add_argument("--seed", type=int, default=DEFAULTS["seed"], help="RNG seed (default: %(default)s)")
    p.add_argument("--max-tilt", type=float, default=DEFAULTS["max_tilt"],
                   help="bound on the two horizontal-axis rotations in degrees (default: %(default)s)")
    _add_alignment_flags(p)

    p = sub.add_parser("normals", help="subsample a point cloud and estimate normals")
    p.add_argument("input", help="PLY or OBJ point cloud")
    p.add_argument("-o", "--output", required=True, help="output PLY with nx, ny, nz")
    p.add_argument("-k", "--k", dest="k", type=int, default=DEFAULTS["k"],
                   help="neighbors per plane fit (default: %(default)s)")
    p.add_argument("--cell", type=float, default=DEFAULTS["cell"],
                   help="subsampling voxel size in meters, 0 disables (default: %(default)s)")
    p.add_argument("--threads", type=int, default=DEFAULTS["threads"],
                   help="worker threads, 0 = all cores (default: %(default)s)")
    p.add_argument("--double", action="store_true", help="write 64-bit PLY coordinates")

    p = sub.add_parser("info", help="print counts, bounding box and weights")
    p.add_argument("input", help="PLY or OBJ file")
    return parser


def _threads(n):
    return (os.cpu_count() or 1) if n == 0 else max(1, n)


def _config(args, canonicalize=False) -> AlignmentConfig:
    try:
        frame = FrameConfig(np.array(args.z_axis, float), np.array(args.x_axis, float))
        return AlignmentConfig(
            frame=frame,
            resolution_h=args.resolution_h,
            resolution_v=args.resolution_v,
            fraction=args.threshold,
            window_h=args.window_h,
            window_v=args.window_v,
            canonicalize=canonicalize,
            vertical=not args.no_vertical,
            deterministic=args.deterministic,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_samples(path, k, threads):
    geom = load_geometry(path)
    if len(geom) == 0:
        raise EmptyGeometry(f"{path} contains no geometry")
    if isinstance(geom, PointCloud) and geom.normals is None:
        log.info("estimating normals with k=%d", k)
        geom = estimate_normals(geom, k, workers=threads)
    return geom, to_samples(geom)


def _rotate_geometry(geom, R):
    if isinstance(geom, TriangleMesh):
        return TriangleMesh(geom.vertices @ R.T, geom.faces)
    return PointCloud(geom.points @ R.T, None if geom.normals is None else geom.normals @ R.T)


def _rel(path, base):
    try:
        return os.path.relpath(path, base)
    except ValueError:
        return str(path)


def cmd_align(args) -> int:
    cfg = _config(args, canonicalize=args.canonicalize)
    geom, samples = _load_samples(args.input, args.k, _threads(args.threads))
    res = normalize_pose(samples, cfg)
    save_geometry(_rotate_geometry(geom, res.R_total), args.output, double=args.double)
    report = args.report or str(Path(args.output).with_suffix(".json"))
    base = Path(report).resolve().parent
    extra = {"input": _rel(Path(args.input).resolve(), base), "output": _rel(Path(args.output).resolve(), base)}
    if args.frames:
        leveled = apply_rotation(samples, res.R_vertical)
        frames = list_manhattan_frames(leveled, cfg.frame, cfg.fraction)
        extra["manhattan_frames"] = [{"gamma_deg": f.gamma, "support": f.support} for f in frames]
        for f in frames:
            print(f"frame gamma={f.gamma:.3f} deg support={f.support:.6g}")
    write_report(res, report, extra)
    if args.histogram_csv:
        res.horizontal.histogram.to_csv(args.histogram_csv)
    if args.sphere_csv and res.vertical is not None:
        res.vertical.grid.to_csv(args.sphere_csv)
    print(f"gamma={res.gamma_refined:.4f} deg; aligned geometry -> {args.output}; report -> {report}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    try:
        ecfg = EvalConfig(trials=args.trials, seed=args.seed, tilt_bound=args.max_tilt,
                          alignment=cfg, threads=_threads(args.threads))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _, samples = _load_samples(args.input, args.k, _threads(args.threads))
    report = run_evaluation(samples, ecfg, name=args.name or Path(args.input).stem)
    if args.csv:
        export_csv(report, args.csv)
    print(summary_table(report))
    if report.n_failed:
        print(f"{report.n_failed} of {len(report.rows)} trials failed", file=sys.stderr)
        return EXIT_ALIGN
    return EXIT_OK


def cmd_normals(args) -> int:
    geom = load_geometry(args.input)
    if isinstance(geom, TriangleMesh):
        geom = PointCloud(geom.vertices)
    if len(geom) == 0:
        raise EmptyGeometry(f"{args.input} contains no points")
    if args.cell > 0:
        geom = grid_subsample(geom, args.cell)
    out = estimate_normals(geom, args.k, workers=_threads(args.threads))
    save_geometry(out, args.output, double=args.double)
    print(f"{len(out)} points with normals -> {args.output}")
    return EXIT_OK


def cmd_info(args) -> int:
    geom = load_geometry(args.input)
    if len(geom) == 0:
        raise EmptyGeometry(f"{args.input} contains no geometry")
    if isinstance(geom, TriangleMesh):
        lo, hi = geom.vertices.min(axis=0), geom.vertices.max(axis=0)
        areas = geom.face_areas()
        print("type: triangle mesh")
        print(f"vertices: {len(geom.vertices)}")
        print(f"triangles: {len(geom.faces)}")
        print(f"total area: {areas.sum():.6g}")
        print(f"degenerate triangles: {int((areas < 1e-12).sum())}")
        print("has normals: yes (from faces)")
    else:
        lo, hi = geom.points.min(axis=0), geom.points.max(axis=0)
        print("type: point cloud")
        print(f"points: {len(geom)}")
        print(f"total weight: {float(len(geom)):.6g}")
        print(f"has normals: {'yes' if geom.normals is not None else 'no'}")
    print("bbox min: " + " ".join(f"{v:.6g}" for v in lo))
    print("bbox max: " + " ".join(f"{v:.6g}" for v in hi))
    return EXIT_OK


COMMANDS = {"align": cmd_align, "eval": cmd_eval, "normals": cmd_normals, "info": cmd_info}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except AlignmentError as exc:
        print(f"mwalign: alignment failed: {exc}", file=sys.stderr)
        return EXIT_ALIGN
    except (UsageError, MWAlignError, OSError) as exc:
        print(f"mwalign: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
