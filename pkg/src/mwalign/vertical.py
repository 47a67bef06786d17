"""
Leveling: recover the true vertical axis from coarsely vertical normals.

Normals within 40 degrees of the vertical axis are binned on a folded
azimuth/inclination grid that collapses opposing directions (floor and
ceiling) and the four azimuth quadrants into one eighth of the sphere. The
folding also merges directions that are not opposed, so each grid cell keeps
the actual normals and retains only its largest 2-degree cluster. The
thresholded heaviest peak yields a coarse axis, refined by a weighted median
in the tangent plane.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

from .errors import BadResolution, NoVerticalNormals
from .geometry import (
    FrameConfig,
    angle_between,
    lower_weighted_median,
    normalize,
    rotation_aligning,
    tangent_basis,
)
from .geometry_io import GeometrySet

log = logging.getLogger(__name__)

VERTICAL_BAND_DEG = 40.0
DEFAULT_RESOLUTION_DEG = 1.0
DEFAULT_FRACTION = 0.75
DEFAULT_WINDOW_DEG = 5.0
CELL_CLUSTER_DEG = 2.0
POLE_TOL = 1e-9
# slack on the inclusive band edges so trigonometric round-off cannot drop them
BAND_TOL_DEG = 1e-9
# polar angles are snapped to multiples of 2**-36 deg so that adding or
# subtracting 90/180 is exact and the antipodal fold is bit-identical
_QUANTUM = 2.0 ** 36
_BELOW_90 = np.nextafter(90.0, 0.0)


@dataclass
class SphereGrid2D:
    """Folded azimuth (columns, [0, 90)) by inclination (rows, [0, 40]) grid.

    Per cell only the heaviest normal cluster survives: ``weight`` is its
    weight, ``mean`` its upward unit mean direction, ``count`` its member
    count. ``raw_weight`` is the cell total before pruning.
    """

    resolution: float
    weight: np.ndarray
    mean: np.ndarray
    count: np.ndarray
    n_clusters: np.ndarray
    raw_weight: np.ndarray

    @property
    def shape(self):
        return self.weight.shape

    @property
    def total(self) -> float:
        return float(self.weight.sum())

    def to_csv(self, path) -> None:
        rows, cols = self.shape
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("phi_cell_deg,theta_cell_deg,weight\n")
            for r in range(rows):
                for c in range(cols):
                    fh.write(f"{c * self.resolution:.6g},{r * self.resolution:.6g},"
                             f"{self.weight[r, c]:.17g}\n")


@dataclass
class SphereCluster:
    cells: list
    total_weight: float


@dataclass
class VerticalOptions:
    resolution: float = DEFAULT_RESOLUTION_DEG
    fraction: float = DEFAULT_FRACTION
    window: float = DEFAULT_WINDOW_DEG
    # 1 is the single median step; more repeats it around the new axis
    refine_iterations: int = 1


@dataclass
class VerticalAlignment:
    z_star: np.ndarray
    z_coarse: np.ndarray
    rotation: np.ndarray
    clusters: list
    grid: SphereGrid2D = field(repr=False)
    refine_fallback: bool = False
    n_vertical: int = 0


def filter_vertical(samples: GeometrySet, frame: FrameConfig) -> np.ndarray:
    """Indices of samples within 40 degrees of ``z`` or ``-z`` (inclusive)."""
    ang = angle_between(samples.normals, frame.z)
    lim = VERTICAL_BAND_DEG + BAND_TOL_DEG
    keep = np.flatnonzero((ang <= lim) | (ang >= 180.0 - lim))
    if keep.size == 0:
        raise NoVerticalNormals("no coarsely vertical normals (within 40 deg of the vertical axis)")
    return keep


def _snap(deg):
    return np.round(deg * _QUANTUM) / _QUANTUM


def polar_angles(n, frame: FrameConfig):
    """Azimuth in [-180, 180) and inclination in [0, 180] of unit normals, degrees.

    Equivalent to ``atan2(<n,y>, <n,x>)`` and ``arccos(<n,z>)`` up to ~1e-11
    deg, but built from absolute components so that ``n`` and ``-n`` give
    angles related exactly by the antipodal map. Azimuth is 0 at the poles.
    """
    local = np.atleast_2d(np.asarray(n, dtype=np.float64)) @ frame.basis.T
    cx, cy, cz = local[:, 0], local[:, 1], local[:, 2]
    a = _snap(np.degrees(np.arccos(np.clip(np.abs(cz), 0.0, 1.0))))
    theta = np.where(cz >= 0.0, a, 180.0 - a)
    b = _snap(np.degrees(np.arctan2(np.abs(cy), np.abs(cx))))
    phi = np.where(cx >= 0.0, np.where(cy >= 0.0, b, -b), np.where(cy >= 0.0, 180.0 - b, b - 180.0))
    phi = np.where(phi >= 180.0, phi - 360.0, phi)
    phi = np.where(np.abs(cz) >= 1.0 - POLE_TOL, 0.0, phi)
    if np.ndim(n) == 1:
        return float(phi[0]), float(theta[0])
    return phi, theta


def fold_sphere(phi, theta):
    """Fold polar angles to one eighth of the sphere.

    ``phi~ = ||phi| - 90|`` and ``theta~ = 90 - |theta - 90|``. The azimuth
    value 90 (reached for phi in {0, ±180}) is clamped just below 90 so it
    stays in the top cell.
    """
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    pt = np.abs(np.abs(phi) - 90.0)
    tt = 90.0 - np.abs(theta - 90.0)
    pt = np.where(pt >= 90.0, _BELOW_90, pt)
    if pt.ndim == 0:
        return float(pt), float(tt)
    return pt, tt


def _grid_shape(resolution: float):
    if not resolution > 0:
        raise BadResolution(f"resolution must be positive, got {resolution}")
    n_phi = int(round(90.0 / resolution))
    if n_phi < 1 or abs(n_phi * resolution - 90.0) > 1e-9:
        raise BadResolution(f"resolution {resolution} does not divide 90 degrees")
    n_theta = int(np.ceil(VERTICAL_BAND_DEG / resolution - 1e-9))
    return n_theta, n_phi


@njit(cache=True)
def _cluster_cells(order, cell_ids, normals, weights, cos_tol, n_cells):
    """Greedy first-fit clustering of upward normals inside each grid cell.

    ``order`` lists sample indices sorted by cell, input order preserved
    within a cell. Returns per-cell (weight, mean, count, n_clusters, raw).
    """
    out_w = np.zeros(n_cells)
    out_mean = np.zeros((n_cells, 3))
    out_cnt = np.zeros(n_cells, np.int64)
    out_ncl = np.zeros(n_cells, np.int64)
    out_raw = np.zeros(n_cells)
    N = order.shape[0]
    cl_sum = np.empty((N, 3))
    cl_unit = np.empty((N, 3))
    cl_w = np.empty(N)
    cl_cnt = np.empty(N, np.int64)
    s = 0
    while s < N:
        cell = cell_ids[order[s]]
        e = s
        while e < N and cell_ids[order[e]] == cell:
            e += 1
        k = 0
        raw = 0.0
        for j in range(s, e):
            i = order[j]
            w = weights[i]
            raw += w
            nx, ny, nz = normals[i, 0], normals[i, 1], normals[i, 2]
            hit = -1
            for q in range(k):
                d = nx * cl_unit[q, 0] + ny * cl_unit[q, 1] + nz * cl_unit[q, 2]
                if abs(d) >= cos_tol:
                    hit = q
                    if d < 0.0:
                        nx, ny, nz = -nx, -ny, -nz
                    break
            if hit < 0:
                cl_sum[k, 0] = w * nx
                cl_sum[k, 1] = w * ny
                cl_sum[k, 2] = w * nz
                cl_unit[k, 0] = nx
                cl_unit[k, 1] = ny
                cl_unit[k, 2] = nz
                cl_w[k] = w
                cl_cnt[k] = 1
                k += 1
            else:
                cl_sum[hit, 0] += w * nx
                cl_sum[hit, 1] += w * ny
                cl_sum[hit, 2] += w * nz
                cl_w[hit] += w
                cl_cnt[hit] += 1
                norm = np.sqrt(cl_sum[hit, 0] ** 2 + cl_sum[hit, 1] ** 2 + cl_sum[hit, 2] ** 2)
                if norm > 0.0:
                    cl_unit[hit, 0] = cl_sum[hit, 0] / norm
                    cl_unit[hit, 1] = cl_sum[hit, 1] / norm
                    cl_unit[hit, 2] = cl_sum[hit, 2] / norm
        best = 0
        for q in range(1, k):
            if cl_w[q] > cl_w[best]:
                best = q
        out_w[cell] = cl_w[best]
        out_mean[cell, 0] = cl_unit[best, 0]
        out_mean[cell, 1] = cl_unit[best, 1]
        out_mean[cell, 2] = cl_unit[best, 2]
        out_cnt[cell] = cl_cnt[best]
        out_ncl[cell] = k
        out_raw[cell] = raw
        s = e
    return out_w, out_mean, out_cnt, out_ncl, out_raw


def build_sphere_grid(samples: GeometrySet, frame: FrameConfig, indices=None,
                      resolution: float = DEFAULT_RESOLUTION_DEG) -> SphereGrid2D:
    """Hash vertical normals into the folded grid with per-cell cluster pruning."""
    n_theta, n_phi = _grid_shape(resolution)
    if indices is None:
        indices = np.arange(len(samples))
    normals = samples.normals[indices]
    weights = np.ascontiguousarray(samples.weights[indices], dtype=np.float64)
    up = np.where((normals @ frame.z)[:, None] < 0.0, -normals, normals)
    phi, theta = polar_angles(up, frame)
    pt, tt = fold_sphere(phi, theta)
    col = np.clip(np.floor(pt / resolution).astype(np.int64), 0, n_phi - 1)
    row = np.clip(np.floor(tt / resolution).astype(np.int64), 0, n_theta - 1)
    cell_ids = row * n_phi + col
    order = np.argsort(cell_ids, kind="stable")
    w, mean, cnt, ncl, raw = _cluster_cells(
        order, cell_ids, np.ascontiguousarray(up), weights,
        float(np.cos(np.radians(CELL_CLUSTER_DEG))), n_theta * n_phi,
    )
    shape = (n_theta, n_phi)
    return SphereGrid2D(resolution, w.reshape(shape), mean.reshape(shape + (3,)),
                        cnt.reshape(shape), ncl.reshape(shape), raw.reshape(shape))


def cluster_sphere_peaks(grid: SphereGrid2D, fraction: float = DEFAULT_FRACTION) -> list:
    """Connected groups of cells at or above ``fraction * max``, heaviest first.

    Adjacency is the 8-neighborhood plus azimuth wrap-around (first and last
    column) and the pole rule: all cells of inclination row 0 touch.
    """
    peak = grid.weight.max()
    if peak <= 0:
        return []
    rows, cols = grid.shape
    above = grid.weight >= fraction * peak
    cells = [tuple(rc) for rc in np.argwhere(above)]
    label = {}
    clusters = []
    for seed in cells:
        if seed in label:
            continue
        stack, members = [seed], []
        label[seed] = len(clusters)
        while stack:
            r, c = stack.pop()
            members.append((r, c))
            nbrs = [((r + dr), (c + dc) % cols) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                    if (dr or dc) and 0 <= r + dr < rows]
            if r == 0:
                nbrs += [(0, cc) for cc in range(cols)]
            for nb in nbrs:
                if above[nb] and nb not in label:
                    label[nb] = label[seed]
                    stack.append(nb)
        members.sort()
        clusters.append(SphereCluster(members, float(sum(grid.weight[m] for m in members))))
    clusters.sort(key=lambda c: (-c.total_weight, c.cells[0]))
    return clusters


def coarse_vertical_axis(cluster: SphereCluster, grid: SphereGrid2D) -> np.ndarray:
    """Weighted mean of the retained cell-cluster directions of a peak."""
    idx = tuple(np.asarray(cluster.cells).T)
    w = grid.weight[idx]
    v = (w[:, None] * grid.mean[idx]).sum(axis=0)
    return normalize(v)


def _tangent_median(normals, weights, z0):
    u, v = tangent_basis(z0)
    a = lower_weighted_median(normals @ u, weights)
    b = lower_weighted_median(normals @ v, weights)
    c = np.sqrt(max(0.0, 1.0 - a * a - b * b))
    return normalize(c * z0 + a * u + b * v)


def refine_vertical_axis(normals, weights, z0, window: float = DEFAULT_WINDOW_DEG):
    """Per-coordinate lower weighted median, in the tangent plane at ``z0``, of the
    normals within ``window`` degrees of ``z0`` (sign ignored).

    Returns ``(axis, fallback)``; ``fallback`` is True when the window was
    empty and ``z0`` is returned.
    """
    z0 = normalize(np.asarray(z0, dtype=np.float64))
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    up = np.where((normals @ z0)[:, None] < 0.0, -normals, normals)
    sel = angle_between(up, z0) <= window
    if not sel.any():
        log.warning("empty vertical refinement window")
        return z0, True
    return _tangent_median(up[sel], weights[sel], z0), False


def align_vertical(samples: GeometrySet, frame: FrameConfig,
                   opts: VerticalOptions | None = None) -> VerticalAlignment:
    """Optimal vertical axis and the leveling rotation mapping it onto ``z``.

    Expects the data to be within about 30 degrees of level.
    """
    opts = opts or VerticalOptions()
    idx = filter_vertical(samples, frame)
    grid = build_sphere_grid(samples, frame, idx, opts.resolution)
    clusters = cluster_sphere_peaks(grid, opts.fraction)
    if not clusters:
        raise NoVerticalNormals("vertical normals carry zero total weight")
    z0 = coarse_vertical_axis(clusters[0], grid)
    # the refinement looks at every normal near the coarse axis, not only the
    # pre-filtered ones, so a tilt close to the 40 deg band does not truncate it
    z_star, fallback = refine_vertical_axis(samples.normals, samples.weights, z0, opts.window)
    for _ in range(opts.refine_iterations - 1):
        if fallback:
            break
        z_next, _ = refine_vertical_axis(samples.normals, samples.weights, z_star, opts.window)
        moved = angle_between(z_next, z_star)
        z_star = z_next
        if moved < 1e-9:
            break
    if z_star @ frame.z < 0:
        z_star = -z_star
    return VerticalAlignment(
        z_star=z_star,
        z_coarse=z0,
        rotation=rotation_aligning(z_star, frame.z),
        clusters=clusters,
        grid=grid,
        refine_fallback=fallback,
        n_vertical=len(idx),
    )
