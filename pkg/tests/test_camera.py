import numpy as np
import pytest
from hypothesis import given, settings
from numpy.testing import assert_allclose

from camcond.camera import (CameraPose, Extrinsics, Intrinsics, Rig,
                            normalize_trajectory, pixel_centers,
                            relative_pose, skew)

from conftest import extrinsics_st, rotations, vectors3


# -- skew -------------------------------------------------------------------

def test_skew_pinned_example():
    expected = np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float)
    assert np.array_equal(skew([1, 2, 3]), expected)


def test_skew_zero():
    assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))


def test_skew_annihilates_own_vector():
    # BLAS may fuse multiply-adds, leaving one-ulp debris instead of exact 0
    v = np.array([0.3, -1.1, 2.0])
    assert_allclose(skew(v) @ v, np.zeros(3), atol=1e-15)


def test_skew_rejects_wrong_shape():
    with pytest.raises(ValueError):
        skew([1.0, 2.0])


@given(v=vectors3())
def test_skew_antisymmetric_exactly(v):
    s = skew(v)
    assert np.array_equal(s + s.T, np.zeros((3, 3)))


@given(v=vectors3(), w=vectors3())
def test_skew_matches_cross_product(v, w):
    assert_allclose(skew(v) @ w, np.cross(v, w), rtol=0, atol=1e-12)


# -- validation at construction ---------------------------------------------

def test_extrinsics_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        Extrinsics(r=np.eye(3) * 1.01, t=np.zeros(3))


def test_extrinsics_rejects_reflection():
    r = np.diag([1.0, 1.0, -1.0])  # orthonormal but det = -1
    with pytest.raises(ValueError):
        Extrinsics(r=r, t=np.zeros(3))


def test_extrinsics_rejects_nonfinite():
    t = np.array([np.nan, 0.0, 0.0])
    with pytest.raises(ValueError):
        Extrinsics(r=np.eye(3), t=t)


def test_extrinsics_arrays_are_frozen():
    e = Extrinsics.identity()
    with pytest.raises(ValueError):
        e.r[0, 0] = 2.0


def test_camera_center_inverts_translation():
    rng = np.random.default_rng(3)
    for _ in range(10):
        q = rng.normal(size=4)
        r = _quat(q)
        t = rng.normal(size=3)
        e = Extrinsics(r=r, t=t)
        # center must map to the camera-frame origin
        assert_allclose(e.transform(e.camera_center[None])[0], np.zeros(3),
                        atol=1e-12)


def _quat(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def test_intrinsics_basic_fields():
    i = Intrinsics.from_params(fx=100.0, fy=120.0, cx=32.0, cy=24.0,
                               width=64, height=48)
    assert i.fx == 100.0 and i.fy == 120.0
    assert i.cx == 32.0 and i.cy == 24.0
    assert np.array_equal(i.k[2], [0.0, 0.0, 1.0])


@pytest.mark.parametrize("kwargs", [
    dict(fx=-1.0, fy=1.0, cx=0.5, cy=0.5, width=2, height=2),
    dict(fx=1.0, fy=0.0, cx=0.5, cy=0.5, width=2, height=2),
    dict(fx=1.0, fy=1.0, cx=5.0, cy=0.5, width=2, height=2),
    dict(fx=1.0, fy=1.0, cx=0.5, cy=-0.5, width=2, height=2),
])
def test_intrinsics_rejects_bad_params(kwargs):
    with pytest.raises(ValueError):
        Intrinsics.from_params(**kwargs)


def test_intrinsics_rejects_bad_bottom_row():
    k = np.eye(3)
    k[2, 2] = 2.0
    with pytest.raises(ValueError):
        Intrinsics(k=k, width=2, height=2)


def test_intrinsics_scaled_to_halves_focal():
    i = Intrinsics.from_params(fx=100.0, fy=80.0, cx=32.0, cy=32.0,
                               width=64, height=64)
    s = i.scaled_to(height=32, width=32)
    assert s.fx == 50.0 and s.fy == 40.0
    assert s.cx == 16.0 and s.cy == 16.0
    assert (s.width, s.height) == (32, 32)


def test_camera_pose_rejects_negative_frame_index():
    i = Intrinsics.from_params(fx=1.0, fy=1.0, cx=0.5, cy=0.5,
                               width=1, height=1)
    with pytest.raises(ValueError):
        CameraPose(intrinsics=i, extrinsics=Extrinsics.identity(),
                   frame_index=-1, view_id="a")


# -- rig topology -----------------------------------------------------------

def test_rig_ring_neighbors_wrap():
    rig = Rig.ring(["a", "b", "c", "d"])
    assert rig.neighbors("a") == ("d", "b")
    assert rig.neighbors("d") == ("c", "a")


def test_rig_ring_needs_three():
    with pytest.raises(ValueError):
        Rig.ring(["a", "b"])


def test_rig_rejects_asymmetric_relation():
    with pytest.raises(ValueError, match="asymmetric"):
        Rig(views=("a", "b"), neighbor_map={"a": (None, "b"),
                                            "b": (None, None)})


def test_rig_rejects_unknown_view():
    with pytest.raises(ValueError, match="unknown view"):
        Rig(views=("a",), neighbor_map={"a": (None, "z")})


def test_rig_open_chain_allowed():
    rig = Rig(views=("a", "b"), neighbor_map={"a": (None, "b"),
                                              "b": ("a", None)})
    assert rig.neighbors("a") == (None, "b")
    assert rig.neighbors("missing") == (None, None)


# -- relative pose ----------------------------------------------------------

def test_relative_pose_identical_inputs():
    rng = np.random.default_rng(5)
    e = Extrinsics(r=_quat(rng.normal(size=4)), t=rng.normal(size=3))
    rel = relative_pose(e, e)
    assert_allclose(rel.r, np.eye(3), atol=1e-12)
    assert_allclose(rel.t, np.zeros(3), atol=1e-12)


def test_relative_pose_identity_neighbor_is_noop():
    rng = np.random.default_rng(6)
    e = Extrinsics(r=_quat(rng.normal(size=4)), t=rng.normal(size=3))
    rel = relative_pose(e, Extrinsics.identity())
    assert np.array_equal(rel.r, e.r)
    assert np.array_equal(rel.t, e.t)


def test_relative_pose_point_transform_oracle():
    # applying the relative pose to neighbor-frame coordinates must land on
    # local-frame coordinates, for random pose pairs and random points
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(30):
        local = Extrinsics(r=_quat(rng.normal(size=4)), t=rng.normal(size=3))
        neigh = Extrinsics(r=_quat(rng.normal(size=4)), t=rng.normal(size=3))
        rel = relative_pose(local, neigh)
        points = rng.normal(size=(20, 3))
        direct = local.transform(points)
        chained = rel.transform(neigh.transform(points))
        worst = max(worst, np.abs(direct - chained).max())
    assert worst <= 1e-9


@settings(max_examples=50)
@given(a=extrinsics_st(), b=extrinsics_st(), c=extrinsics_st())
def test_relative_pose_composes(a, b, c):
    ab = relative_pose(a, b)
    bc = relative_pose(b, c)
    ac = relative_pose(a, c)
    assert_allclose(ab.r @ bc.r, ac.r, atol=1e-9)
    assert_allclose(ab.r @ bc.t + ab.t, ac.t, atol=1e-9)


@given(p=extrinsics_st())
def test_relative_pose_self_is_identity(p):
    rel = relative_pose(p, p)
    assert np.abs(rel.r - np.eye(3)).max() <= 1e-12
    assert np.abs(rel.t).max() <= 1e-12


# -- trajectory normalization -----------------------------------------------

def test_normalize_empty_raises():
    with pytest.raises(ValueError, match="empty trajectory"):
        normalize_trajectory([])


def test_normalize_single_pose_anchors_exactly():
    e = Extrinsics(r=_quat(np.array([1.0, 0.2, -0.3, 0.4])),
                   t=np.array([1.0, 2.0, 3.0]))
    out = normalize_trajectory([e])
    assert len(out) == 1
    assert np.array_equal(out[0].r, np.eye(3))
    assert np.array_equal(out[0].t, np.zeros(3))


def test_normalize_constant_trajectory():
    e = Extrinsics(r=_quat(np.array([0.5, 0.5, 0.5, 0.5])),
                   t=np.array([-1.0, 0.5, 2.0]))
    out = normalize_trajectory([e] * 4)
    for o in out:
        assert_allclose(o.r, np.eye(3), atol=1e-12)
        assert_allclose(o.t, np.zeros(3), atol=1e-12)


def test_normalize_pure_translation_sign():
    # t_k = [k,0,0] with identity R: the point-transform oracle fixes the
    # sign of the normalized translations to be t_k itself
    poses = [Extrinsics(r=np.eye(3), t=np.array([float(k), 0.0, 0.0]))
             for k in range(4)]
    out = normalize_trajectory(poses)
    for k, o in enumerate(out):
        assert np.array_equal(o.t, np.array([float(k), 0.0, 0.0]))
        # oracle: same world point, same camera coordinates through both chains
        x = np.array([[0.3, -0.7, 1.9]])
        assert_allclose(o.transform(poses[0].transform(x)),
                        poses[k].transform(x), atol=1e-12)


@settings(max_examples=30)
@given(a=extrinsics_st(), b=extrinsics_st(), c=extrinsics_st())
def test_normalize_idempotent(a, b, c):
    once = normalize_trajectory([a, b, c])
    twice = normalize_trajectory(once)
    for x, y in zip(once, twice):
        assert np.abs(x.r - y.r).max() <= 1e-12
        assert np.abs(x.t - y.t).max() <= 1e-12


@settings(max_examples=30)
@given(a=extrinsics_st(), b=extrinsics_st())
def test_normalize_outputs_valid_rotations(a, b):
    for o in normalize_trajectory([a, b]):
        assert np.abs(o.r @ o.r.T - np.eye(3)).max() <= 1e-9


# -- pixel grid helper -------------------------------------------------------

def test_pixel_centers_native_resolution():
    i = Intrinsics.from_params(fx=1.0, fy=1.0, cx=2.0, cy=2.0,
                               width=4, height=4)
    uu, vv = pixel_centers(i, 4, 4)
    assert uu[0, 0] == 0.5 and vv[0, 0] == 0.5
    assert uu[3, 3] == 3.5 and vv[3, 3] == 3.5


def test_pixel_centers_rescaled():
    i = Intrinsics.from_params(fx=1.0, fy=1.0, cx=4.0, cy=4.0,
                               width=8, height=8)
    uu, vv = pixel_centers(i, 4, 4)
    # native-unit centers of 2x2 pixel blocks
    assert uu[0, 0] == 1.0 and vv[0, 0] == 1.0
    assert uu[3, 3] == 7.0 and vv[3, 3] == 7.0
