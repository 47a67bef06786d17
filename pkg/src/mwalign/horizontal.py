"""
Rotation about the vertical axis.

Horizontal normals are projected into the x/y plane, their angles folded
into [0, 90) so that the four wall directions of one Manhattan frame pile up
in the same histogram cell, and the heaviest thresholded peak gives the
rotation angle. A weighted median over the raw folded angles near that peak
refines it.

Angle convention: a horizontal direction's angle is measured counter-
clockwise (right-handed about ``z``) from ``x``. ``gamma`` is the angle of the
dominant frame's walls and the correcting rotation is ``-gamma`` about ``z``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BadResolution, NoHorizontalNormals
from .geometry import (
    FrameConfig,
    angle_between,
    lower_weighted_median,
    project_onto_plane,
    rotation_about_axis,
    signed_angle_around_axis,
)
from .geometry_io import GeometrySet

log = logging.getLogger(__name__)

HORIZONTAL_BAND_DEG = 45.0
DEFAULT_RESOLUTION_DEG = 1.0
DEFAULT_FRACTION = 0.75
DEFAULT_WINDOW_DEG = 5.0
FRAME_MERGE_DEG = 2.0
BAND_TOL_DEG = 1e-9


@dataclass
class HorizontalAngleSet:
    angles_folded: np.ndarray
    angles_raw: np.ndarray
    weights: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return len(self.weights)


@dataclass
class AngleHistogram1D:
    resolution: float
    cells: np.ndarray
    counts: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def total(self) -> float:
        return float(self.cells.sum())

    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.resolution

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("cell_start_deg,weight\n")
            for i, w in enumerate(self.cells):
                fh.write(f"{i * self.resolution:.6g},{w:.17g}\n")


@dataclass
class CellCluster1D:
    members: tuple
    total_weight: float
    mean_angle: float


@dataclass
class HorizontalOptions:
    resolution: float = DEFAULT_RESOLUTION_DEG
    fraction: float = DEFAULT_FRACTION
    window: float = DEFAULT_WINDOW_DEG


@dataclass
class HorizontalAlignment:
    gamma_coarse: float
    gamma_refined: float
    clusters: list
    rotation: np.ndarray
    histogram: AngleHistogram1D = field(repr=False)
    refine_fallback: bool = False
    n_horizontal: int = 0


@dataclass
class ManhattanFrame:
    gamma: float
    support: float


def _mod90_diff(a, b):
    """Signed ``a - b`` reduced to [-45, 45)."""
    return np.mod(np.asarray(a) - b + 45.0, 90.0) - 45.0


def filter_horizontal(samples: GeometrySet, frame: FrameConfig) -> np.ndarray:
    """Indices of samples whose normal is 45..135 degrees (inclusive) from ``z``."""
    ang = angle_between(samples.normals, frame.z)
    lo = HORIZONTAL_BAND_DEG - BAND_TOL_DEG
    keep = np.flatnonzero((ang >= lo) & (ang <= 180.0 - lo))
    if keep.size == 0:
        raise NoHorizontalNormals("no coarsely horizontal normals (45-135 deg from the vertical axis)")
    return keep


def fold_to_quarter(gamma):
    """Fold angles in [-180, 180) to [0, 90), preserving them modulo 90."""
    g = np.asarray(gamma, dtype=np.float64)
    g = np.where(g < 0.0, g + 180.0, g)
    g = np.where(g > 90.0, g - 90.0, g)
    # exact 90 (and values rounded up to it) folds to 0
    g = np.where(g >= 90.0, g - 90.0, g)
    g = np.where(g < 0.0, 0.0, g)
    return float(g) if g.ndim == 0 else g


def horizontal_angles(samples: GeometrySet, frame: FrameConfig, indices=None) -> HorizontalAngleSet:
    """Raw and folded in-plane angles of the (already filtered) horizontal normals."""
    if indices is None:
        indices = np.arange(len(samples))
    proj = project_onto_plane(samples.normals[indices], frame.z)
    raw = np.atleast_1d(signed_angle_around_axis(frame.x, proj, frame.z))
    return HorizontalAngleSet(
        angles_folded=np.atleast_1d(fold_to_quarter(raw)),
        angles_raw=raw,
        weights=samples.weights[indices],
        indices=np.asarray(indices),
    )


def _cell_count(resolution: float) -> int:
    if not resolution > 0:
        raise BadResolution(f"resolution must be positive, got {resolution}")
    n = int(round(90.0 / resolution))
    if n < 1 or abs(n * resolution - 90.0) > 1e-9:
        raise BadResolution(f"resolution {resolution} does not divide 90 degrees")
    return n


def build_histogram(angles: HorizontalAngleSet, resolution: float = DEFAULT_RESOLUTION_DEG) -> AngleHistogram1D:
    n = _cell_count(resolution)
    idx = np.clip(np.floor(np.asarray(angles.angles_folded) / resolution).astype(np.int64), 0, n - 1)
    cells = np.bincount(idx, weights=angles.weights, minlength=n).astype(np.float64)
    counts = np.bincount(idx, minlength=n)
    return AngleHistogram1D(resolution, cells, counts)


def coarse_gamma(cluster: CellCluster1D, hist: AngleHistogram1D) -> float:
    """Weight-averaged cell center of a cluster, unwrapped around its heaviest cell."""
    members = np.asarray(cluster.members)
    w = hist.cells[members]
    centers = (members + 0.5) * hist.resolution
    pivot = centers[int(np.argmax(w))]
    unwrapped = pivot + _mod90_diff(centers, pivot)
    if w.sum() <= 0:
        return float(fold_to_quarter(pivot))
    return float(fold_to_quarter(float(np.sum(w * unwrapped) / np.sum(w))))


def threshold_and_cluster(hist: AngleHistogram1D, fraction: float = DEFAULT_FRACTION) -> list:
    """Contiguous runs of cells at or above ``fraction * max`` (cyclic), heaviest first."""
    n = hist.n_cells
    peak = hist.cells.max()
    above = hist.cells >= fraction * peak
    if peak <= 0:
        return []
    if above.all():
        runs = [list(range(n))]
    else:
        start = int(np.flatnonzero(~above)[0])
        runs, cur = [], []
        for step in range(1, n + 1):
            i = (start + step) % n
            if above[i]:
                cur.append(i)
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
    clusters = []
    for run in runs:
        c = CellCluster1D(tuple(run), float(hist.cells[run].sum()), 0.0)
        c.mean_angle = coarse_gamma(c, hist)
        clusters.append(c)
    clusters.sort(key=lambda c: (-c.total_weight, c.mean_angle))
    return clusters


def refine_gamma(angles: HorizontalAngleSet, gamma0: float,
                 window: float = DEFAULT_WINDOW_DEG) -> tuple[float, bool]:
    """Lower weighted median of folded angles within ``window`` of ``gamma0`` (mod 90).

    Returns ``(gamma, fallback)``; ``fallback`` is True when no angle fell in
    the window and ``gamma0`` was returned unchanged.
    """
    d = _mod90_diff(angles.angles_folded, gamma0)
    sel = np.abs(d) <= window
    if not sel.any():
        log.warning("empty refinement window around %.3f deg", gamma0)
        return float(fold_to_quarter(gamma0)), True
    m = lower_weighted_median(gamma0 + d[sel], angles.weights[sel])
    return float(fold_to_quarter(np.mod(m + 180.0, 360.0) - 180.0)), False


def align_horizontal(samples: GeometrySet, frame: FrameConfig,
                     opts: HorizontalOptions | None = None) -> HorizontalAlignment:
    """Angle of the dominant Manhattan frame about ``z`` and the rotation undoing it.

    The input should already be leveled. Raises
    :class:`~mwalign.errors.NoHorizontalNormals` when nothing is horizontal.
    """
    opts = opts or HorizontalOptions()
    idx = filter_horizontal(samples, frame)
    angles = horizontal_angles(samples, frame, idx)
    hist = build_histogram(angles, opts.resolution)
    clusters = threshold_and_cluster(hist, opts.fraction)
    if not clusters:
        raise NoHorizontalNormals("horizontal normals carry zero total weight")
    g0 = clusters[0].mean_angle
    g, fallback = refine_gamma(angles, g0, opts.window)
    return HorizontalAlignment(
        gamma_coarse=g0,
        gamma_refined=g,
        clusters=clusters,
        rotation=rotation_about_axis(frame.z, -g),
        histogram=hist,
        refine_fallback=fallback,
        n_horizontal=len(idx),
    )


def list_manhattan_frames(samples: GeometrySet, frame: FrameConfig,
                          fraction: float = DEFAULT_FRACTION,
                          opts: HorizontalOptions | None = None) -> list:
    """All thresholded peaks as ``ManhattanFrame(gamma, support)``, heaviest first.

    Peaks whose refined angles lie within 2 degrees of each other (mod 90) are
    merged; the merged entry keeps the angle of its heavier member.
    """
    opts = opts or HorizontalOptions()
    idx = filter_horizontal(samples, frame)
    angles = horizontal_angles(samples, frame, idx)
    hist = build_histogram(angles, opts.resolution)
    frames: list[ManhattanFrame] = []
    for c in threshold_and_cluster(hist, fraction):
        g, _ = refine_gamma(angles, c.mean_angle, opts.window)
        for f in frames:
            if abs(_mod90_diff(g, f.gamma)) < FRAME_MERGE_DEG:
                f.support += c.total_weight
                break
        else:
            frames.append(ManhattanFrame(g, c.total_weight))
    frames.sort(key=lambda f: (-f.support, f.gamma))
    return frames
