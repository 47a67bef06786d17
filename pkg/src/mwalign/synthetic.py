"""
Synthetic indoor scenes with known ground-truth pose.

Used by the test-suite, the acceptance checks and the experiment scripts.
All generators take a ``numpy.random.Generator`` so scenes are reproducible.
"""
from __future__ import annotations

import numpy as np

from .geometry import normalize, rotation_about_axis
from .geometry_io import GeometrySet, PointCloud, TriangleMesh, cloud_to_samples

DEFAULT_BOX = (6.0, 4.0, 3.0)


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _plane_grid(origin, u, v, nu, nv, rng, jitter):
    """Triangulated grid on the parallelogram ``origin + s*u + t*v`` (s, t in [0, 1])."""
    s = np.linspace(0.0, 1.0, nu + 1)
    t = np.linspace(0.0, 1.0, nv + 1)
    S, T = np.meshgrid(s, t, indexing="ij")
    if jitter > 0:
        inner = (slice(1, -1), slice(1, -1))
        S[inner] += rng.uniform(-jitter, jitter, S[inner].shape) / nu
        T[inner] += rng.uniform(-jitter, jitter, T[inner].shape) / nv
    verts = origin + S.reshape(-1, 1) * u + T.reshape(-1, 1) * v
    idx = np.arange((nu + 1) * (nv + 1)).reshape(nu + 1, nv + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    faces = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return verts, faces


def box_mesh(size=DEFAULT_BOX, spacing: float = 0.06, rng=None, jitter: float = 0.2) -> TriangleMesh:
    """Closed axis-aligned box centered at the origin, six tessellated faces.

    Interior vertices are jittered within their face plane, so triangle areas
    vary while every face normal stays exactly axis-parallel.
    """
    rng = _rng(rng)
    sx, sy, sz = size
    lo = -0.5 * np.asarray(size, dtype=np.float64)
    ex, ey, ez = np.diag(size).astype(np.float64)
    planes = [
        (lo, ex, ey), (lo + ez, ex, ey),  # floor, ceiling
        (lo, ex, ez), (lo + ey, ex, ez),  # walls facing y
        (lo, ey, ez), (lo + ex, ey, ez),  # walls facing x
    ]
    verts, faces, offset = [], [], 0
    for origin, u, v in planes:
        nu = max(1, int(round(np.linalg.norm(u) / spacing)))
        nv = max(1, int(round(np.linalg.norm(v) / spacing)))
        pv, pf = _plane_grid(origin, u, v, nu, nv, rng, jitter)
        verts.append(pv)
        faces.append(pf + offset)
        offset += len(pv)
    return TriangleMesh(np.concatenate(verts), np.concatenate(faces))


def perturb_normals(normals, sigma_deg: float, rng=None) -> np.ndarray:
    """Tilt each normal by an isotropic Gaussian angular offset.

    ``sigma_deg`` is the RMS angle between the perturbed and the original
    normal, so each of the two tangent components has std ``sigma_deg / sqrt(2)``.
    """
    rng = _rng(rng)
    normals = np.asarray(normals, dtype=np.float64)
    if sigma_deg <= 0:
        return normals.copy()
    helper = np.where(np.abs(normals[:, [0]]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    u = normalize(np.cross(helper, normals))
    v = np.cross(normals, u)
    sig = np.radians(sigma_deg) / np.sqrt(2.0)
    a = rng.normal(0.0, sig, len(normals))[:, None]
    b = rng.normal(0.0, sig, len(normals))[:, None]
    return normalize(normals + np.tan(a) * u + np.tan(b) * v)


def random_directions(n: int, rng=None) -> np.ndarray:
    return normalize(_rng(rng).normal(size=(n, 3)))


def _rect_points(n, origin, u, v, rng):
    s, t = rng.random((2, n))
    return origin + s[:, None] * u + t[:, None] * v


def box_cloud(n: int = 60_000, size=DEFAULT_BOX, rng=None, noise_deg: float = 0.0,
              clutter: float = 0.0) -> GeometrySet:
    """Points spread over the six faces of a box (area-proportional).

    ``noise_deg`` perturbs every normal; a ``clutter`` fraction of points get
    uniformly random normals instead.
    """
    rng = _rng(rng)
    lo = -0.5 * np.asarray(size, dtype=np.float64)
    ex, ey, ez = np.diag(size).astype(np.float64)
    rects = [(lo, ex, ey, ez), (lo + ez, ex, ey, ez), (lo, ex, ez, ey), (lo + ey, ex, ez, ey),
             (lo, ey, ez, ex), (lo + ex, ey, ez, ex)]
    areas = np.array([np.linalg.norm(np.cross(u, v)) for _, u, v, _ in rects])
    counts = rng.multinomial(n, areas / areas.sum())
    pts, nrm = [], []
    for (origin, u, v, w), c in zip(rects, counts):
        pts.append(_rect_points(c, origin, u, v, rng))
        nrm.append(np.repeat(normalize(w)[None], c, axis=0))
    pts, nrm = np.concatenate(pts), np.concatenate(nrm)
    nrm = perturb_normals(nrm, noise_deg, rng)
    if clutter > 0:
        m = rng.random(len(nrm)) < clutter
        nrm[m] = random_directions(int(m.sum()), rng)
    return cloud_to_samples(PointCloud(pts, nrm))


def dual_manhattan_cloud(n: int = 40_000, split: float = 0.7, second_deg: float = 45.0,
                         rng=None, noise_deg: float = 0.0, floor_share: float = 0.4) -> GeometrySet:
    """Two rooms sharing a floor level, the second rotated by ``second_deg``.

    Wall support is divided ``split`` : ``1 - split`` between the rooms; the
    ground-truth frame is the first room's.
    """
    rng = _rng(rng)
    n_floor = int(n * floor_share)
    n_wall = n - n_floor
    n_a = int(round(n_wall * split))
    n_b = n_wall - n_a
    pts, nrm = [], []
    # floor and ceiling over the union footprint
    for h, c in ((0.0, n_floor // 2), (3.0, n_floor - n_floor // 2)):
        p = _rect_points(c, np.array([-4.0, -4.0, h]), np.array([14.0, 0, 0]), np.array([0, 8.0, 0]), rng)
        pts.append(p)
        nrm.append(np.tile([0.0, 0.0, 1.0], (c, 1)))
    for count, center, rot in ((n_a, np.array([0.0, 0.0, 0.0]), 0.0), (n_b, np.array([7.0, 0.0, 0.0]), second_deg)):
        R = rotation_about_axis([0, 0, 1], rot)
        walls = [(np.array([-3.0, -3.0, 0]), np.array([6.0, 0, 0]), np.array([0, -1.0, 0])),
                 (np.array([-3.0, 3.0, 0]), np.array([6.0, 0, 0]), np.array([0, 1.0, 0])),
                 (np.array([-3.0, -3.0, 0]), np.array([0, 6.0, 0]), np.array([-1.0, 0, 0])),
                 (np.array([3.0, -3.0, 0]), np.array([0, 6.0, 0]), np.array([1.0, 0, 0]))]
        per = rng.multinomial(count, [0.25] * 4)
        for (o, u, w), c in zip(walls, per):
            p = _rect_points(c, o, u, np.array([0, 0, 3.0]), rng)
            pts.append(p @ R.T + center)
            nrm.append(np.tile(R @ w, (c, 1)))
    nrm = perturb_normals(np.concatenate(nrm), noise_deg, rng)
    return cloud_to_samples(PointCloud(np.concatenate(pts), nrm))


def attic_cloud(n: int = 30_000, floor_share: float = 0.6, slant_deg: float = 30.0,
                rng=None, noise_deg: float = 0.0, wall_share: float = 0.3) -> GeometrySet:
    """Room whose vertical structure is a level floor plus one slanted ceiling.

    ``floor_share`` of the vertical-ish weight lies on the floor, the rest on a
    ceiling tilted by ``slant_deg`` about ``x``; walls add horizontal structure.
    """
    rng = _rng(rng)
    n_wall = int(n * wall_share)
    n_vert = n - n_wall
    n_floor = int(round(n_vert * floor_share))
    n_slant = n_vert - n_floor
    pts = [_rect_points(n_floor, np.array([-3.0, -2.0, 0.0]), np.array([6.0, 0, 0]), np.array([0, 4.0, 0]), rng)]
    nrm = [np.tile([0.0, 0.0, 1.0], (n_floor, 1))]
    R = rotation_about_axis([1, 0, 0], slant_deg)
    pts.append(_rect_points(n_slant, np.array([-3.0, -2.0, 2.5]), np.array([6.0, 0, 0]), R @ np.array([0, 4.0, 0]), rng))
    nrm.append(np.tile(R @ np.array([0.0, 0.0, 1.0]), (n_slant, 1)))
    box = box_cloud(n_wall, (6.0, 4.0, 2.5), rng)
    walls = np.abs(box.normals[:, 2]) < 0.5
    pts.append(box.positions[walls] + [0, 0, 1.25])
    nrm.append(box.normals[walls])
    nrm = perturb_normals(np.concatenate(nrm), noise_deg, rng)
    return cloud_to_samples(PointCloud(np.concatenate(pts), nrm))


def asymmetric_room(n: int = 40_000, size=(6.0, 4.0, 3.0), rng=None, noise_deg: float = 0.0) -> GeometrySet:
    """Box room with an extra partition wall close to its ``+x`` end.

    Its canonical pose is the generated pose: long side on ``x``, heavier
    ``+x`` end slab.
    """
    rng = _rng(rng)
    room = box_cloud(int(n * 0.85), size, rng, noise_deg)
    m = n - len(room)
    sx, sy, sz = size
    x0 = 0.5 * sx - 0.05 * sx
    p = _rect_points(m, np.array([x0, -0.5 * sy, -0.5 * sz]), np.array([0, sy * 0.6, 0]), np.array([0, 0, sz]), rng)
    nrm = perturb_normals(np.tile([1.0, 0.0, 0.0], (m, 1)), noise_deg, rng)
    return cloud_to_samples(PointCloud(np.concatenate([room.positions, p]), np.concatenate([room.normals, nrm])))


def tilt_about(normal, angle_deg: float, axis) -> np.ndarray:
    return rotation_about_axis(axis, angle_deg) @ np.asarray(normal, dtype=np.float64)


__all__ = [
    "box_mesh", "box_cloud", "dual_manhattan_cloud", "attic_cloud", "asymmetric_room",
    "perturb_normals", "random_directions", "tilt_about",
]
