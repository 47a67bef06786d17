"""
Vector and rotation primitives.

Vectors are plain ``numpy`` arrays of shape ``(3,)`` (or ``(N, 3)`` where a
function says so). Angles cross function boundaries in degrees; radians are
only used internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AntipodalInput, DegenerateVector

UNIT_TOL = 1e-9
EPS_NORM = 1e-12


def as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("vector has non-finite components")
    return a


def normalize(v) -> np.ndarray:
    """Return ``v / |v|``; works row-wise on ``(N, 3)`` input."""
    a = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(norm < EPS_NORM):
        raise DegenerateVector("cannot normalize a vector of (near) zero length")
    return a / norm


@dataclass(frozen=True)
class FrameConfig:
    """User-chosen target frame: vertical axis ``z`` and horizontal axis ``x``.

    ``y`` is derived as ``z × x``. Neither axis has to be a canonical basis
    vector.
    """

    z_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    x_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        z = as_vec3(self.z_axis)
        x = as_vec3(self.x_axis)
        if abs(np.linalg.norm(z) - 1.0) > 1e-6 or abs(np.linalg.norm(x) - 1.0) > 1e-6:
            raise ValueError("frame axes must be unit vectors")
        if abs(float(z @ x)) > 1e-6:
            raise ValueError("frame axes z and x must be orthogonal")
        # re-orthonormalize so downstream code can rely on 1e-12 orthogonality
        z = z / np.linalg.norm(z)
        x = x - (x @ z) * z
        x = x / np.linalg.norm(x)
        z.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "z_axis", z)
        object.__setattr__(self, "x_axis", x)

    @property
    def z(self) -> np.ndarray:
        return self.z_axis

    @property
    def x(self) -> np.ndarray:
        return self.x_axis

    @property
    def y(self) -> np.ndarray:
        return np.cross(self.z_axis, self.x_axis)

    @property
    def basis(self) -> np.ndarray:
        """Rows x, y, z; maps world vectors to frame coordinates."""
        return np.stack([self.x, self.y, self.z])

    def to_dict(self) -> dict:
        return {"z_axis": self.z.tolist(), "x_axis": self.x.tolist()}


def angle_between(a, b) -> np.ndarray | float:
    """Smallest angle between unit vectors, in degrees within [0, 180].

    Evaluated as ``atan2(|a × b|, <a, b>)``, which equals the arccos of the
    dot product but stays accurate near 0 and 180 degrees. Broadcasts over
    leading dimensions, so ``a`` may be ``(N, 3)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a, b = np.broadcast_arrays(a, b)
    dot = np.sum(a * b, axis=-1)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    out = np.degrees(np.arctan2(cross, dot))
    return float(out) if np.ndim(out) == 0 else out


def _wrap180(deg):
    """Map degrees to [-180, 180)."""
    out = np.where(deg >= 180.0, deg - 360.0, deg)
    return np.where(out < -180.0, out + 360.0, out)


def signed_angle_around_axis(v, ref, axis) -> np.ndarray | float:
    """Signed angle from ``v`` to ``ref`` about ``axis``, degrees in [-180, 180).

    Computed as ``atan2(<axis, v × ref>, <v, ref>)``. With this sign, a vector
    lying counter-clockwise of ``ref`` (right-handed about ``axis``) gets a
    negative angle; e.g. ``signed_angle_around_axis(y, x, z) == -90``.
    Consequently ``signed_angle_around_axis(R(axis, t) @ v, v, axis) == -t``.
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(np.linalg.norm(v, axis=-1) < EPS_NORM):
        raise DegenerateVector("signed angle of a zero-length vector")
    ref = np.asarray(ref, dtype=np.float64)
    axis = np.asarray(axis, dtype=np.float64)
    num = np.sum(axis * np.cross(v, ref), axis=-1)
    den = np.sum(v * ref, axis=-1)
    out = _wrap180(np.degrees(np.arctan2(num, den)))
    return float(out) if np.ndim(out) == 0 else out


def project_onto_plane(n, z) -> np.ndarray:
    """Remove the component of ``n`` (``(3,)`` or ``(N, 3)``) along unit ``z``."""
    n = np.asarray(n, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return n - (n @ z)[..., None] * z


def _exact_cos_sin(angle_deg: float) -> tuple[float, float]:
    q, r = divmod(float(angle_deg), 90.0)
    if r == 0.0:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(q) % 4]
    t = np.radians(angle_deg)
    return float(np.cos(t)), float(np.sin(t))


def rotation_about_axis(axis, angle_deg: float) -> np.ndarray:
    """Right-handed rotation by ``angle_deg`` about unit ``axis`` (Rodrigues).

    Multiples of 90 degrees use exact cosines/sines, so quarter turns about a
    basis axis have entries exactly in {-1, 0, 1}.
    """
    k = as_vec3(axis)
    k = k / np.linalg.norm(k)
    c, s = _exact_cos_sin(angle_deg)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return c * np.eye(3) + s * kx + (1.0 - c) * np.outer(k, k)


def rotation_aligning(src, dst) -> np.ndarray:
    """Minimal rotation taking unit ``src`` onto unit ``dst``.

    The rotation axis is ``src × dst``. Raises :class:`AntipodalInput` when the
    two vectors are 179 degrees or more apart, where that axis is unstable.
    """
    a = normalize(as_vec3(src))
    b = normalize(as_vec3(dst))
    angle = angle_between(a, b)
    if angle >= 179.0:
        raise AntipodalInput(f"vectors are {angle:.3f} deg apart; minimal rotation is ill-defined")
    axis = np.cross(a, b)
    norm = np.linalg.norm(axis)
    if norm < 1e-15:
        return np.eye(3)
    return rotation_about_axis(axis / norm, angle)


def rotation_angle(R) -> float:
    """Rotation angle of ``R`` in degrees, in [0, 180]."""
    c = (np.trace(np.asarray(R, dtype=np.float64)) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def is_rotation(R, tol: float = UNIT_TOL) -> bool:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        return False
    return bool(np.allclose(R @ R.T, np.eye(3), atol=tol) and abs(np.linalg.det(R) - 1.0) <= tol)


def tangent_basis(n) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors ``(u, v)`` completing ``n`` to a right-handed basis."""
    n = normalize(as_vec3(n))
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = normalize(np.cross(helper, n))
    return u, np.cross(n, u)


def lower_weighted_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half the total weight."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.size == 0:
        raise ValueError("weighted median of an empty set")
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    i = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    return float(values[order[min(i, len(order) - 1)]])
