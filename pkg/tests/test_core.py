import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from lidarswd.core import (
    CapacityError,
    DirectionSet,
    InvalidInputError,
    InvalidParameterError,
    RigidPerturbation,
    as_cloud,
    jitter,
    load_cloud,
    make_rng,
    normalize_to_unit_sphere,
    read_points_bin,
    read_xyz,
    rotate_yaw,
    sample_directions,
    write_points_bin,
    write_xyz,
)

from strategies import clouds


def test_as_cloud_rejects_bad_shapes():
    with pytest.raises(InvalidInputError):
        as_cloud(np.zeros((0, 3)))
    with pytest.raises(InvalidInputError):
        as_cloud(np.zeros((4, 2)))
    with pytest.raises(InvalidInputError):
        as_cloud([[0.0, np.nan, 1.0]])
    assert as_cloud([1, 2, 3]).shape == (1, 3)


def test_error_classes_are_value_errors():
    for cls in (InvalidInputError, InvalidParameterError, CapacityError):
        assert issubclass(cls, ValueError)


def test_make_rng_streams_are_reproducible_and_split():
    a = make_rng(4, 1).random(5)
    assert np.array_equal(a, make_rng(4, 1).random(5))
    assert not np.array_equal(a, make_rng(4, 2).random(5))


def test_jitter_zero_is_identity(rng):
    X = rng.random((50, 3))
    assert np.array_equal(jitter(X, 0.0, 7), X)


def test_jitter_is_deterministic(rng):
    X = rng.random((100, 3))
    assert np.array_equal(jitter(X, 0.1, 1), jitter(X, 0.1, 1))
    assert not np.array_equal(jitter(X, 0.1, 1), jitter(X, 0.1, 2))


def test_jitter_displacement_std():
    X = np.zeros((2000, 3))
    disp = jitter(X, 0.05, 3) - X
    assert abs(disp.std() - 0.05) < 0.2 * 0.05
    assert abs(disp.mean()) < 0.01


@pytest.mark.parametrize("sigma", [math.nan, math.inf, -0.1])
def test_jitter_rejects_bad_sigma(sigma):
    with pytest.raises(InvalidParameterError):
        jitter(np.zeros((3, 3)), sigma, 0)


def test_rotate_quarter_turn():
    out = rotate_yaw([[1.0, 0.0, 0.0]], math.pi / 2)
    assert np.allclose(out, [[0.0, 1.0, 0.0]], atol=1e-12, rtol=0)


def test_rotate_full_turn_and_identity(rng):
    X = rng.normal(size=(200, 3)) * 20
    assert np.array_equal(rotate_yaw(X, 0.0), X)
    assert np.abs(rotate_yaw(X, 2 * math.pi) - X).max() < 1e-9


def test_rotate_rejects_nonfinite():
    with pytest.raises(InvalidParameterError):
        rotate_yaw(np.zeros((1, 3)), math.inf)


@given(clouds(), st.floats(-10, 10))
def test_rotation_preserves_xy_norms_and_inverts(X, angle):
    R = rotate_yaw(X, angle)
    assert np.allclose(np.hypot(R[:, 0], R[:, 1]), np.hypot(X[:, 0], X[:, 1]), atol=1e-12, rtol=1e-14)
    assert np.array_equal(R[:, 2], X[:, 2])
    assert np.abs(rotate_yaw(R, -angle) - X).max() <= 1e-9


def test_sample_directions_contract():
    one = sample_directions(1, 0)
    assert len(one) == 1
    assert abs(np.linalg.norm(one.directions[0]) - 1) <= 1e-12
    a, b = sample_directions(64, 5), sample_directions(64, 5)
    assert np.array_equal(a.directions, b.directions)
    with pytest.raises(InvalidParameterError):
        sample_directions(0, 0)


def test_sample_directions_uniformity():
    d = sample_directions(10000, 9).directions
    assert np.all(np.abs(np.linalg.norm(d, axis=1) - 1) <= 1e-12)
    assert np.linalg.norm(d.mean(axis=0)) < 0.05
    # each coordinate of a uniform unit vector has variance 1/3
    assert np.allclose(d.var(axis=0), 1 / 3, atol=0.02)


def test_direction_set_validation_and_immutability():
    with pytest.raises(InvalidParameterError):
        DirectionSet(np.array([[1.0, 1.0, 0.0]]))
    ds = DirectionSet(np.array([[0.0, 0.0, 1.0]]))
    with pytest.raises(ValueError):
        ds.directions[0, 0] = 1.0


def test_normalize_fixed_point():
    X = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 0.5, 0], [0, -0.5, 0]])
    norm = normalize_to_unit_sphere(X)
    assert norm.scale == 1.0
    assert np.allclose(norm.points, X, atol=1e-12)


def test_normalize_single_point():
    norm = normalize_to_unit_sphere([[5.0, 5.0, 5.0]])
    assert np.array_equal(norm.points, np.zeros((1, 3)))
    assert np.array_equal(norm.center, [5.0, 5.0, 5.0])
    assert norm.scale == 1.0


@given(clouds(min_n=2))
@example(np.array([[5e-183, 0.0, 0.0], [0.0, 0.0, 0.0]]))
def test_normalize_round_trip(X):
    norm = normalize_to_unit_sphere(X)
    assert np.abs(norm.points.mean(axis=0)).max() < 1e-9
    if norm.scale != 1.0 or np.ptp(X, axis=0).max() > 0:
        assert abs(np.linalg.norm(norm.points, axis=1).max() - 1) < 1e-9
    assert np.abs(norm.invert() - X).max() < 1e-9


def test_rigid_perturbation():
    p = RigidPerturbation("yaw-rotation", 5 * math.pi)
    assert math.isclose(p.reported_magnitude, math.pi)
    X = np.array([[1.0, 0.0, 0.0]])
    assert np.allclose(p.apply(X), [[-1.0, 0.0, 0.0]], atol=1e-12)
    j = RigidPerturbation("gaussian-jitter", 0.1, seed=4)
    assert np.array_equal(j.apply(X), jitter(X, 0.1, 4))
    with pytest.raises(InvalidParameterError):
        RigidPerturbation("gaussian-jitter", -1.0)
    with pytest.raises(InvalidParameterError):
        RigidPerturbation("shear", 1.0)


def test_xyz_round_trip_is_exact(tmp_path, rng):
    X = rng.normal(size=(30, 3)) * 1e3
    write_xyz(tmp_path / "a.xyz", X)
    assert np.array_equal(read_xyz(tmp_path / "a.xyz"), X)
    assert np.array_equal(load_cloud(tmp_path / "a.xyz"), X)


def test_xyz_skips_comments_and_rejects_short_lines(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("# header\n\n1 2 3\n4 5 6 7\n")
    assert np.array_equal(read_xyz(p), [[1, 2, 3], [4, 5, 6]])
    p.write_text("1 2\n")
    with pytest.raises(InvalidInputError, match=":1:"):
        read_xyz(p)


def test_binary_triples_round_trip(tmp_path, rng):
    X = rng.random((10, 3)).astype(np.float32).astype(np.float64)
    write_points_bin(tmp_path / "a.f32", X)
    assert (tmp_path / "a.f32").stat().st_size == 120
    assert np.array_equal(read_points_bin(tmp_path / "a.f32"), X)
    (tmp_path / "b.f32").write_bytes(b"\0" * 13)
    with pytest.raises(InvalidInputError, match="offset 12"):
        read_points_bin(tmp_path / "b.f32")


def test_load_cloud_unknown_extension(tmp_path):
    with pytest.raises(InvalidInputError):
        load_cloud(tmp_path / "a.ply")
