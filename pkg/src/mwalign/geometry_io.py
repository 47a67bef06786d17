"""
Point cloud / triangle mesh containers, PLY and OBJ I/O, and conversion to
weighted oriented samples.

Meshes become one sample per face (centroid, unit face normal, area as
weight); point clouds one sample per point with weight 1.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError
from scipy.spatial import cKDTree

from .errors import (
    EmptyGeometry,
    IoError,
    MissingNormals,
    ParseError,
    TooFewPoints,
    UnsupportedFormat,
)

log = logging.getLogger(__name__)

MIN_FACE_AREA = 1e-12
DEFAULT_K = 30
DEFAULT_SUBSAMPLE_CELL = 0.02


@dataclass
class PointCloud:
    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(self.normals) != len(self.points):
                raise ValueError("normals and points differ in length")

    def __len__(self):
        return len(self.points)


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError("face index out of range")
            f = self.faces
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise ValueError("face with repeated vertex indices")

    def __len__(self):
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


@dataclass
class GeometrySet:
    """Weighted oriented samples plus a handle on the geometry they came from.

    Normals are unoriented: ``n`` and ``-n`` mean the same thing everywhere
    downstream.
    """

    positions: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    provenance: str  # "point-cloud" | "mesh"
    source: PointCloud | TriangleMesh | None = None
    dropped: int = 0
    face_index: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def subset(self, mask) -> "GeometrySet":
        """Samples selected by a boolean mask or index array (no source handle)."""
        return GeometrySet(
            self.positions[mask], self.normals[mask], self.weights[mask], self.provenance
        )


# --------------------------------------------------------------------------
# samples


def mesh_to_samples(mesh: TriangleMesh) -> GeometrySet:
    """One sample per non-degenerate face: centroid, unit normal, area."""
    v = mesh.vertices[mesh.faces]
    cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    norm = np.linalg.norm(cross, axis=1)
    area = 0.5 * norm
    keep = area >= MIN_FACE_AREA
    dropped = int((~keep).sum())
    if not keep.any():
        raise EmptyGeometry(f"all {len(mesh.faces)} faces are degenerate")
    if dropped:
        log.info("dropped %d degenerate faces", dropped)
    return GeometrySet(
        positions=v[keep].mean(axis=1),
        normals=cross[keep] / norm[keep, None],
        weights=area[keep],
        provenance="mesh",
        source=mesh,
        dropped=dropped,
        face_index=np.flatnonzero(keep),
    )


def cloud_to_samples(cloud: PointCloud) -> GeometrySet:
    if len(cloud) == 0:
        raise EmptyGeometry("point cloud is empty")
    if cloud.normals is None:
        raise MissingNormals("point cloud has no normals; estimate them first")
    norm = np.linalg.norm(cloud.normals, axis=1)
    if np.any(norm < 1e-12):
        raise MissingNormals(f"{int((norm < 1e-12).sum())} points have zero-length normals")
    return GeometrySet(
        positions=cloud.points.copy(),
        normals=cloud.normals / norm[:, None],
        weights=np.ones(len(cloud)),
        provenance="point-cloud",
        source=cloud,
    )


def to_samples(geom) -> GeometrySet:
    if isinstance(geom, GeometrySet):
        return geom
    if isinstance(geom, TriangleMesh):
        return mesh_to_samples(geom)
    if isinstance(geom, PointCloud):
        return cloud_to_samples(geom)
    raise TypeError(f"cannot convert {type(geom).__name__} to samples")


# --------------------------------------------------------------------------
# normals and subsampling


def estimate_normals(cloud: PointCloud, k: int = DEFAULT_K, workers: int = 1,
                     chunk: int = 100_000) -> PointCloud:
    """Per-point normals from a least-squares plane through the k nearest neighbors.

    The neighborhood includes the point itself plus its ``k`` nearest
    neighbors. The sign of each normal is arbitrary. Results do not depend on
    ``workers``.
    """
    if k < 3:
        raise TooFewPoints(f"k must be at least 3, got {k}")
    pts = cloud.points
    if len(pts) < k + 1:
        raise TooFewPoints(f"need at least {k + 1} points for k={k}, got {len(pts)}")
    tree = cKDTree(pts)
    normals = np.empty_like(pts)
    for start in range(0, len(pts), chunk):
        block = pts[start:start + chunk]
        _, idx = tree.query(block, k=k + 1, workers=workers)
        nb = pts[idx]
        nb = nb - nb.mean(axis=1, keepdims=True)
        cov = np.einsum("nki,nkj->nij", nb, nb)
        _, vecs = np.linalg.eigh(cov)
        normals[start:start + chunk] = vecs[:, :, 0]
    return PointCloud(pts.copy(), normals)


def grid_subsample(cloud: PointCloud, cell: float = DEFAULT_SUBSAMPLE_CELL) -> PointCloud:
    """Keep the first point (in input order) of every occupied voxel of edge ``cell``."""
    if cell <= 0:
        raise ValueError("cell size must be positive")
    if len(cloud) == 0:
        return PointCloud(np.empty((0, 3)), None if cloud.normals is None else np.empty((0, 3)))
    keys = np.floor(cloud.points / cell).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first.sort()
    normals = None if cloud.normals is None else cloud.normals[first]
    return PointCloud(cloud.points[first], normals)


# --------------------------------------------------------------------------
# file formats


def _detect_format(path, fmt):
    if fmt and fmt != "auto":
        if fmt not in ("ply", "obj"):
            raise UnsupportedFormat(f"unknown format {fmt!r}")
        return fmt
    ext = Path(path).suffix.lower().lstrip(".")
    if ext not in ("ply", "obj"):
        raise UnsupportedFormat(f"cannot infer format from extension {ext!r}")
    return ext


def load_geometry(path, fmt: str = "auto"):
    """Read a PLY (ASCII or binary) or OBJ file.

    Returns a :class:`TriangleMesh` when the file has faces, otherwise a
    :class:`PointCloud`. Polygons are fan-triangulated.
    """
    fmt = _detect_format(path, fmt)
    if not os.path.exists(path):
        raise IoError(f"no such file: {path}")
    if fmt == "ply":
        return _read_ply(path)
    return _read_obj(path)


def _fan(polys) -> np.ndarray:
    tris = []
    for p in polys:
        p = np.asarray(p, dtype=np.int64)
        for j in range(1, len(p) - 1):
            tris.append((p[0], p[j], p[j + 1]))
    return np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def _read_ply(path):
    try:
        ply = PlyData.read(str(path))
    except PlyParseError as exc:
        line = getattr(exc, "line", None)
        row = getattr(exc, "row", None)
        raise ParseError(str(exc), path=path, line=line, offset=row) from exc
    except (ValueError, IndexError, EOFError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed PLY: {exc}", path=path) from exc
    except OSError as exc:
        raise IoError(str(exc)) from exc

    names = [el.name for el in ply.elements]
    if "vertex" not in names:
        raise ParseError("PLY has no 'vertex' element", path=path)
    vert = ply["vertex"].data
    props = vert.dtype.names
    if not all(c in props for c in ("x", "y", "z")):
        raise ParseError("vertex element lacks x/y/z properties", path=path)
    pts = np.column_stack([vert["x"], vert["y"], vert["z"]]).astype(np.float64)

    if "face" in names and len(ply["face"].data):
        fdata = ply["face"].data
        key = next((k for k in ("vertex_indices", "vertex_index") if k in fdata.dtype.names), None)
        if key is None:
            raise ParseError("face element lacks vertex_indices", path=path)
        col = fdata[key]
        lengths = np.fromiter((len(f) for f in col), dtype=np.int64, count=len(col))
        if np.all(lengths == 3):
            faces = np.stack(col).astype(np.int64)
        else:
            faces = _fan(col)
        try:
            return TriangleMesh(pts, faces)
        except ValueError as exc:
            raise ParseError(str(exc), path=path) from exc

    normals = None
    if all(c in props for c in ("nx", "ny", "nz")):
        normals = np.column_stack([vert["nx"], vert["ny"], vert["nz"]]).astype(np.float64)
    return PointCloud(pts, normals)


def _obj_index(token, count, path, lineno):
    try:
        i = int(token.split("/")[0])
    except ValueError:
        raise ParseError(f"bad face index {token!r}", path=path, line=lineno) from None
    if i == 0:
        raise ParseError("OBJ indices are 1-based; got 0", path=path, line=lineno)
    return i - 1 if i > 0 else count + i


def _read_obj(path):
    verts, normals, polys = [], [], []
    try:
        fh = open(path, "r", encoding="utf-8", errors="strict")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    with fh:
        try:
            for lineno, raw in enumerate(fh, start=1):
                parts = raw.split("#", 1)[0].split()
                if not parts:
                    continue
                tag = parts[0]
                if tag == "v":
                    if len(parts) < 4:
                        raise ParseError("vertex needs 3 coordinates", path=path, line=lineno)
                    try:
                        verts.append([float(t) for t in parts[1:4]])
                    except ValueError:
                        raise ParseError("non-numeric vertex", path=path, line=lineno) from None
                elif tag == "vn":
                    try:
                        normals.append([float(t) for t in parts[1:4]])
                    except ValueError:
                        raise ParseError("non-numeric normal", path=path, line=lineno) from None
                elif tag == "f":
                    if len(parts) < 4:
                        raise ParseError("face needs at least 3 vertices", path=path, line=lineno)
                    idx = [_obj_index(t, len(verts), path, lineno) for t in parts[1:]]
                    if min(idx) < 0 or max(idx) >= len(verts):
                        raise ParseError("face index out of range", path=path, line=lineno)
                    polys.append(idx)
        except UnicodeDecodeError as exc:
            raise ParseError(f"not a text OBJ file: {exc}", path=path) from exc

    pts = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    if polys:
        try:
            return TriangleMesh(pts, _fan(polys))
        except ValueError as exc:
            raise ParseError(str(exc), path=path) from exc
    nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3) if len(normals) == len(verts) and normals else None
    return PointCloud(pts, nrm)


def save_geometry(geom, path, fmt: str = "auto", binary: bool = True, double: bool = False) -> None:
    """Write a point cloud or mesh as PLY or OBJ.

    PLY coordinates are 32-bit floats unless ``double`` is set. A
    :class:`GeometrySet` is written through its source geometry.
    """
    if isinstance(geom, GeometrySet):
        if geom.source is None:
            geom = PointCloud(geom.positions, geom.normals)
        else:
            geom = geom.source
    fmt = _detect_format(path, fmt)
    try:
        if fmt == "ply":
            _write_ply(geom, path, binary, double)
        else:
            _write_obj(geom, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_ply(geom, path, binary, double):
    ft = "f8" if double else "f4"
    if isinstance(geom, TriangleMesh):
        pts, nrm = geom.vertices, None
    else:
        pts, nrm = geom.points, geom.normals
    fields = [("x", ft), ("y", ft), ("z", ft)]
    if nrm is not None:
        fields += [("nx", ft), ("ny", ft), ("nz", ft)]
    vert = np.empty(len(pts), dtype=fields)
    vert["x"], vert["y"], vert["z"] = pts.T
    if nrm is not None:
        vert["nx"], vert["ny"], vert["nz"] = nrm.T
    elements = [PlyElement.describe(vert, "vertex")]
    if isinstance(geom, TriangleMesh):
        face = np.empty(len(geom.faces), dtype=[("vertex_indices", "i4", (3,))])
        face["vertex_indices"] = geom.faces
        elements.append(PlyElement.describe(face, "face"))
    PlyData(elements, text=not binary, byte_order="<").write(str(path))


def _write_obj(geom, path):
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(geom, TriangleMesh):
            for p in geom.vertices:
                fh.write("v %.17g %.17g %.17g\n" % tuple(p))
            for f in geom.faces + 1:
                fh.write("f %d %d %d\n" % tuple(f))
        else:
            for p in geom.points:
                fh.write("v %.17g %.17g %.17g\n" % tuple(p))
            if geom.normals is not None:
                for n in geom.normals:
                    fh.write("vn %.17g %.17g %.17g\n" % tuple(n))
