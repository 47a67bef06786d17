"""
End-to-end pose normalization: level, rotate about the vertical axis,
optionally canonicalize, and report.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .canonical import canonicalize_quadrant
from .errors import AlignmentError, EmptyGeometry, IoError
from .geometry import FrameConfig
from .geometry_io import GeometrySet, PointCloud, TriangleMesh, mesh_to_samples
from .horizontal import HorizontalOptions, align_horizontal
from .vertical import VerticalOptions, align_vertical

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AlignmentConfig:
    frame: FrameConfig = field(default_factory=FrameConfig)
    resolution_h: float = 1.0
    resolution_v: float = 1.0
    fraction: float = 0.75
    window_h: float = 5.0
    window_v: float = 5.0
    canonicalize: bool = False
    vertical: bool = True
    deterministic: bool = False
    # extra vertical median steps; 1 keeps the single-step method
    refine_iterations: int = 1

    def __post_init__(self):
        for name in ("resolution_h", "resolution_v"):
            r = getattr(self, name)
            n = round(90.0 / r) if r > 0 else 0
            if n < 1 or abs(n * r - 90.0) > 1e-9:
                raise ValueError(f"{name}={r} does not divide 90 degrees")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.window_h <= 0 or self.window_v <= 0:
            raise ValueError("refinement windows must be positive")
        if self.refine_iterations < 1:
            raise ValueError("refine_iterations must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frame"] = self.frame.to_dict()
        return d


@dataclass
class AlignmentResult:
    R_vertical: np.ndarray
    R_horizontal: np.ndarray
    R_canonical: np.ndarray
    R_total: np.ndarray
    gamma_refined: float | None = None
    gamma_coarse: float | None = None
    z_star: np.ndarray | None = None
    vertical: object = field(default=None, repr=False)
    horizontal: object = field(default=None, repr=False)
    canonical: object = None
    timings: dict = field(default_factory=dict)
    config: AlignmentConfig | None = None
    n_samples: int = 0

    def to_dict(self) -> dict:
        def mat(m):
            return [[float(v) for v in row] for row in np.asarray(m)]

        h = self.horizontal
        v = self.vertical
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "tool": "mwalign",
            "tool_version": __version__,
            "n_samples": int(self.n_samples),
            "config": self.config.to_dict() if self.config else None,
            "rotations": {
                "vertical": mat(self.R_vertical),
                "horizontal": mat(self.R_horizontal),
                "canonical": mat(self.R_canonical),
                "total": mat(self.R_total),
            },
            "rotation_convention": "x' = R_total @ x; R_horizontal rotates by -gamma about z",
            "gamma_deg": None if self.gamma_refined is None else float(self.gamma_refined),
            "gamma_coarse_deg": None if self.gamma_coarse is None else float(self.gamma_coarse),
            "z_star": None if self.z_star is None else [float(c) for c in self.z_star],
            "horizontal": None if h is None else {
                "n_horizontal": int(h.n_horizontal),
                "refine_fallback": bool(h.refine_fallback),
                "clusters": [
                    {"cells": [int(c) for c in cl.members], "weight": float(cl.total_weight),
                     "mean_deg": float(cl.mean_angle)}
                    for cl in h.clusters
                ],
            },
            "vertical": None if v is None else {
                "n_vertical": int(v.n_vertical),
                "refine_fallback": bool(v.refine_fallback),
                "z_coarse": [float(c) for c in v.z_coarse],
                "clusters": [
                    {"cells": [[int(r), int(c)] for r, c in cl.cells], "weight": float(cl.total_weight)}
                    for cl in v.clusters
                ],
            },
            "canonical": None if self.canonical is None else self.canonical.to_dict(),
            "timings_s": {k: float(t) for k, t in self.timings.items()},
        }


def apply_rotation(samples: GeometrySet, R) -> GeometrySet:
    """Rotate positions and normals about the origin; weights are unchanged.

    Meshes rotate their vertices and recompute face samples; point clouds
    rotate positions and normals directly.
    """
    R = np.asarray(R, dtype=np.float64)
    src = samples.source
    if samples.provenance == "mesh" and isinstance(src, TriangleMesh):
        return mesh_to_samples(TriangleMesh(src.vertices @ R.T, src.faces))
    positions = samples.positions @ R.T
    normals = samples.normals @ R.T
    new_src = None
    if isinstance(src, PointCloud) and len(src) == len(samples):
        new_src = PointCloud(positions, normals)
    return GeometrySet(positions, normals, samples.weights.copy(), samples.provenance,
                       new_src, samples.dropped, samples.face_index)


def normalize_pose(samples: GeometrySet, cfg: AlignmentConfig | None = None) -> AlignmentResult:
    """Level, then rotate about the vertical axis, then optionally canonicalize.

    Each stage sees the geometry already rotated by the previous ones.
    Stage failures raise :class:`AlignmentError` subclasses whose ``partial``
    dict holds the rotations computed so far.
    """
    cfg = cfg or AlignmentConfig()
    if samples is None or len(samples) == 0:
        raise EmptyGeometry("no samples to align")
    frame = cfg.frame
    clock = (lambda: 0.0) if cfg.deterministic else time.perf_counter
    timings = {}
    partial = {}
    eye = np.eye(3)

    R_v, vert, cur = eye, None, samples
    if cfg.vertical:
        t0 = clock()
        try:
            opts = VerticalOptions(cfg.resolution_v, cfg.fraction, cfg.window_v, cfg.refine_iterations)
            vert = align_vertical(cur, frame, opts)
        except AlignmentError as exc:
            exc.partial.update(partial)
            raise
        R_v = vert.rotation
        cur = apply_rotation(cur, R_v)
        timings["vertical"] = clock() - t0
        partial["R_vertical"] = R_v

    t0 = clock()
    try:
        hor = align_horizontal(cur, frame, HorizontalOptions(cfg.resolution_h, cfg.fraction, cfg.window_h))
    except AlignmentError as exc:
        exc.partial.update(partial)
        raise
    R_h = hor.rotation
    timings["horizontal"] = clock() - t0

    R_c, canon = eye, None
    if cfg.canonicalize:
        t0 = clock()
        cur = apply_rotation(cur, R_h)
        R_c, canon = canonicalize_quadrant(cur, frame)
        timings["canonical"] = clock() - t0

    return AlignmentResult(
        R_vertical=R_v,
        R_horizontal=R_h,
        R_canonical=R_c,
        R_total=R_c @ R_h @ R_v,
        gamma_refined=hor.gamma_refined,
        gamma_coarse=hor.gamma_coarse,
        z_star=None if vert is None else vert.z_star,
        vertical=vert,
        horizontal=hor,
        canonical=canon,
        timings=timings,
        config=cfg,
        n_samples=len(samples),
    )


def write_report(result: AlignmentResult, path, extra: dict | None = None) -> None:
    """Write the alignment report as JSON (row-major matrices, degrees)."""
    doc = result.to_dict()
    if extra:
        doc.update(extra)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("vertical", "horizontal", "canonical", "total"):
        doc["rotations"][key] = np.asarray(doc["rotations"][key])
    return doc
