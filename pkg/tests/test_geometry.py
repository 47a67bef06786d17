import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwalign.errors import AntipodalInput, DegenerateVector
from mwalign.geometry import (
    FrameConfig,
    angle_between,
    is_rotation,
    lower_weighted_median,
    normalize,
    project_onto_plane,
    rotation_about_axis,
    rotation_aligning,
    rotation_angle,
    signed_angle_around_axis,
    tangent_basis,
)

X, Y, Z = np.eye(3)

unit = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(
    lambda t: np.linalg.norm(t) > 0.1).map(lambda t: normalize(np.array(t)))


def test_angle_between_examples():
    assert angle_between(Z, Z) == 0.0
    assert angle_between(Z, -Z) == 180.0
    assert angle_between(X, Y) == 90.0


def test_angle_between_clamps_rounding():
    v = normalize(np.array([1.0, 1e-9, 0.0]))
    assert angle_between(v * (1 + 1e-15), v) == pytest.approx(0.0, abs=1e-12)


def test_angle_between_accurate_near_zero():
    v = normalize(np.array([1.0, 1e-10, 0.0]))
    assert angle_between(v, np.array([1.0, 0.0, 0.0])) == pytest.approx(np.degrees(1e-10), rel=1e-6)


def test_angle_between_broadcasts():
    out = angle_between(np.stack([X, Y, -X]), X)
    np.testing.assert_allclose(out, [0.0, 90.0, 180.0])


def test_signed_angle_examples():
    assert signed_angle_around_axis(X, X, Z) == 0.0
    assert signed_angle_around_axis(Y, X, Z) == pytest.approx(-90.0)
    assert signed_angle_around_axis(normalize([1, 1, 0]), X, Z) == pytest.approx(-45.0)


def test_signed_angle_half_open():
    # +180 collapses to -180
    assert signed_angle_around_axis(-X, X, Z) == -180.0


def test_signed_angle_degenerate():
    with pytest.raises(DegenerateVector):
        signed_angle_around_axis(np.zeros(3), X, Z)


@settings(max_examples=1000, deadline=None)
@given(unit, unit, st.floats(-179.9, 179.9))
def test_signed_angle_sign_convention(axis, w, t):
    v = project_onto_plane(w, axis)
    if np.linalg.norm(v) < 1e-3:
        return
    v = normalize(v)
    got = signed_angle_around_axis(rotation_about_axis(axis, t) @ v, v, axis)
    assert got == pytest.approx(-t, abs=1e-7)


def test_project_onto_plane_examples():
    np.testing.assert_allclose(project_onto_plane(Z, Z), 0.0, atol=1e-15)
    np.testing.assert_allclose(project_onto_plane(X, Z), X)
    np.testing.assert_allclose(project_onto_plane(normalize([1, 0, 1]), Z), [2 ** -0.5, 0, 0], atol=1e-15)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), unit)
def test_project_is_orthogonal(n, z):
    assert abs(project_onto_plane(np.array(n), z) @ z) < 1e-9


def test_rotation_about_axis_examples():
    np.testing.assert_array_equal(rotation_about_axis(Z, 0.0), np.eye(3))
    np.testing.assert_array_equal(rotation_about_axis(Z, 90.0) @ X, Y)
    np.testing.assert_array_equal(rotation_about_axis(X, 180.0) @ Z, -Z)


def test_quarter_turns_are_exact():
    for k in range(-4, 5):
        R = rotation_about_axis(Z, 90.0 * k)
        assert set(np.unique(R)) <= {-1.0, 0.0, 1.0}


@settings(max_examples=200)
@given(unit, st.floats(-720, 720))
def test_rotation_about_axis_is_rotation(axis, t):
    R = rotation_about_axis(axis, t)
    assert is_rotation(R)
    np.testing.assert_allclose(R @ axis, axis, atol=1e-12)


def test_rotation_aligning_examples():
    np.testing.assert_array_equal(rotation_aligning(Z, Z), np.eye(3))
    R = rotation_aligning(Z, X)
    np.testing.assert_allclose(R @ Z, X, atol=1e-15)
    # z x x = +y, so the minimal rotation turns +90 about +y
    np.testing.assert_allclose(R, rotation_about_axis(Y, 90.0), atol=1e-15)
    t = np.radians(25.0)
    R = rotation_aligning(Z, np.array([0.0, np.sin(t), np.cos(t)]))
    np.testing.assert_allclose(R, rotation_about_axis(-X, 25.0), atol=1e-12)
    assert rotation_angle(R) == pytest.approx(25.0)


def test_rotation_aligning_antipodal():
    with pytest.raises(AntipodalInput):
        rotation_aligning(Z, -Z)
    with pytest.raises(AntipodalInput):
        rotation_aligning(Z, rotation_about_axis(X, 179.0) @ Z)
    rotation_aligning(Z, rotation_about_axis(X, 178.9) @ Z)


@settings(max_examples=1000, deadline=None)
@given(unit, unit)
def test_rotation_aligning_maps_source(a, b):
    if angle_between(a, b) >= 179.0:
        return
    R = rotation_aligning(a, b)
    np.testing.assert_allclose(R @ a, b, atol=1e-9)
    assert is_rotation(R)
    # rotation_angle goes through arccos, which resolves angles near 0 only to ~1e-6 deg
    assert rotation_angle(R) == pytest.approx(angle_between(a, b), abs=1e-5)


@settings(max_examples=300)
@given(unit, unit, unit)
def test_angle_symmetry_and_triangle(a, b, c):
    assert angle_between(a, b) == angle_between(b, a)
    assert angle_between(a, c) <= angle_between(a, b) + angle_between(b, c) + 1e-6


def test_frame_config_default_and_derived_y():
    f = FrameConfig()
    np.testing.assert_array_equal(f.y, Y)
    np.testing.assert_array_equal(f.basis, np.eye(3))


def test_frame_config_custom_axes():
    f = FrameConfig(z_axis=np.array([0.0, 1.0, 0.0]), x_axis=np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(f.y, X)


def test_frame_config_rejects_bad_axes():
    with pytest.raises(ValueError):
        FrameConfig(z_axis=np.array([0.0, 0.0, 2.0]))
    with pytest.raises(ValueError):
        FrameConfig(x_axis=normalize([1.0, 0.0, 1.0]))


def test_tangent_basis_right_handed(rng):
    for n in normalize(rng.normal(size=(50, 3))):
        u, v = tangent_basis(n)
        np.testing.assert_allclose([u @ n, v @ n, u @ v], 0.0, atol=1e-12)
        np.testing.assert_allclose(np.cross(u, v), n, atol=1e-12)


def test_lower_weighted_median():
    assert lower_weighted_median([59.8, 60.2, 60.4], [1, 1, 2]) == 60.2
    # exactly half the weight on each side: the lower one wins
    assert lower_weighted_median([1.0, 2.0], [1, 1]) == 1.0
    assert lower_weighted_median([5.0, -1.0], [1, 3]) == -1.0
    with pytest.raises(ValueError):
        lower_weighted_median([], [])


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(0.01, 10)), min_size=1, max_size=40))
def test_weighted_median_minimizes_l1(pairs):
    v = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])
    m = lower_weighted_median(v, w)
    cost = lambda c: float(np.sum(w * np.abs(v - c)))
    best = min(cost(c) for c in v)
    assert cost(m) <= best + 1e-9 * max(1.0, best)
