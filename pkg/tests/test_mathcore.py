import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cablequad.mathcore import (
    RngStream,
    cross,
    euler_zyx,
    hat,
    hat_map,
    orthonormalize,
    rot_from_euler_zyx,
    so3_exp,
    vee,
)

vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)


@given(vec3, vec3)
def test_hat_matches_cross(v, w):
    np.testing.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-12)
    np.testing.assert_allclose(cross(v, w), np.cross(v, w), atol=1e-12)


@given(vec3)
def test_vee_inverts_hat(v):
    np.testing.assert_array_equal(vee(hat(v)), v)


@given(vec3)
def test_so3_exp_is_rotation(w):
    R = so3_exp(w)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(R), 1.0)
    # the rotation axis is a fixed point
    np.testing.assert_allclose(R @ w, w, atol=1e-9)


def test_so3_exp_small_angle_branch_continuous():
    w = np.array([1e-9, -2e-9, 0.5e-9])
    np.testing.assert_allclose(so3_exp(w), np.eye(3) + hat(w), atol=1e-15)


@given(st.floats(-3.0, 3.0), st.floats(-1.5, 1.5), st.floats(-3.0, 3.0))
def test_euler_round_trip(r, p, y):
    ang = np.array([r, p, y])
    R = rot_from_euler_zyx(ang)
    np.testing.assert_allclose(rot_from_euler_zyx(euler_zyx(R)), R, atol=1e-9)


def test_orthonormalize_reduces_drift():
    R = so3_exp(np.array([0.3, -0.2, 0.1])) + 1e-4
    err0 = np.linalg.norm(R.T @ R - np.eye(3))
    err1 = np.linalg.norm(orthonormalize(R).T @ orthonormalize(R) - np.eye(3))
    assert err1 < 1e-3 * err0


def test_rng_stream_deterministic_and_spawn_independent():
    a, b = RngStream(11), RngStream(11)
    np.testing.assert_array_equal(a.normal(size=5), b.normal(size=5))
    kids = RngStream(11).spawn(2)
    assert not np.array_equal(kids[0].uniform(size=4), kids[1].uniform(size=4))
    again = RngStream(11).spawn(2)
    np.testing.assert_array_equal(RngStream(11).spawn(2)[1].uniform(size=4), again[1].uniform(size=4))


def test_hat_map_alias():
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(hat_map(v), hat(v))
