import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.group.group_core import (
    GroupPoint,
    ball_volume,
    cosh_radius_minus_one,
    distance,
    euclidean_comparison,
    field_derivative,
    flow,
    identity,
    inverse,
    modular,
    multiply,
    radius,
    radius_derivative,
    right_invariant_derivative,
    sample_points,
)
from src.utils.errors import InvalidParameterError, InvalidPointError


def test_product_and_inverse():
    product = multiply(GroupPoint(1.0, 2.0, 2.0), GroupPoint(3.0, 4.0, 5.0))
    assert product.as_tuple() == (7.0, 10.0, 10.0)

    p = GroupPoint(0.3, -1.2, 4.0)
    e = multiply(inverse(p), p)
    assert_allclose(e.as_tuple(), identity().as_tuple(), atol=1e-15)


def test_points_reject_bad_heights():
    with pytest.raises(InvalidPointError):
        GroupPoint(0.0, 0.0, 0.0)
    with pytest.raises(InvalidPointError):
        GroupPoint(float("nan"), 0.0, 1.0)
    with pytest.raises(InvalidPointError):
        GroupPoint(0.0, 0.0, 1e301)


def test_radius_of_vertical_and_horizontal_points():
    assert radius(identity()) == 0.0
    assert_allclose(radius(GroupPoint(0.0, 0.0, math.e ** 2)), 2.0, rtol=1e-14)
    assert_allclose(radius(GroupPoint(0.0, 0.0, math.e ** -3)), 3.0, rtol=1e-14)
    assert_allclose(radius(GroupPoint(1.0, 0.0, 1.0)), math.acosh(1.5), rtol=1e-14)


def test_radius_is_accurate_near_identity():
    p = GroupPoint(1e-9, 0.0, 1.0)
    assert_allclose(radius(p), 1e-9, rtol=1e-9)
    assert cosh_radius_minus_one(p) > 0.0


def test_distance_is_left_invariant(rng):
    p = sample_points(rng, 200)
    q = sample_points(rng, 200)
    g = sample_points(rng, 200)
    assert_allclose(distance(multiply(g, p), multiply(g, q)), distance(p, q), rtol=1e-9, atol=1e-12)
    assert_allclose(distance(p, q), radius(multiply(inverse(p), q)), rtol=1e-9, atol=1e-12)


def test_triangle_inequality(rng):
    p, q, w = sample_points(rng, 500), sample_points(rng, 500), sample_points(rng, 500)
    assert np.all(np.asarray(distance(p, w)) <= np.asarray(distance(p, q)) + np.asarray(distance(q, w)) + 1e-12)


def test_modular_function():
    assert modular(GroupPoint(5.0, -1.0, 2.0)) == 0.25
    p, q = GroupPoint(1.0, 1.0, 3.0), GroupPoint(0.0, 2.0, 0.5)
    assert_allclose(modular(multiply(p, q)), modular(p) * modular(q))


def test_flows_are_one_parameter_subgroups():
    for i in range(3):
        assert_allclose(multiply(flow(i, 0.3), flow(i, 0.4)).as_tuple(), flow(i, 0.7).as_tuple(), rtol=1e-15)
    with pytest.raises(InvalidParameterError):
        flow(3, 1.0)


def test_field_derivatives_of_coordinates():
    p = GroupPoint(0.4, -0.3, 2.5)
    assert_allclose(field_derivative(1, lambda q: q.x1, p), 2.5, rtol=1e-9)
    assert_allclose(field_derivative(0, lambda q: q.a, p, richardson=True), 2.5, rtol=1e-9)
    assert_allclose(right_invariant_derivative(1, lambda q: q.x1, p), 1.0, rtol=1e-9)
    assert_allclose(right_invariant_derivative(0, lambda q: q.x1, p), 0.4, rtol=1e-9)


def test_field_derivative_rejects_bad_steps():
    with pytest.raises(InvalidParameterError):
        field_derivative(1, radius, GroupPoint(1.0, 0.0, 1.0), h=1e-1)


@pytest.mark.parametrize("i", [0, 1, 2])
def test_radius_derivative_matches_finite_differences(i):
    p = GroupPoint(np.array([0.3, 2.0, -4.0]), np.array([-0.7, 0.5, 1.0]), np.array([1.8, 0.2, 7.0]))
    assert_allclose(radius_derivative(i, p), field_derivative(i, radius, p, h=1e-4, richardson=True), rtol=1e-7)


def test_radius_derivative_is_bounded_and_undefined_at_identity(rng):
    p = sample_points(rng, 300, spread=2.0)
    total = sum(np.asarray(radius_derivative(i, p)) ** 2 for i in range(3))
    assert_allclose(total, 1.0, rtol=1e-9)
    with pytest.raises(InvalidPointError):
        radius_derivative(0, identity())


def test_ball_volume():
    assert_allclose(ball_volume(1.0), 2.0 * math.pi * (math.sinh(1.0) * math.cosh(1.0) - 1.0), rtol=1e-6)
    assert_allclose(ball_volume(0.1) / 0.1 ** 3, 4.0 * math.pi / 3.0, rtol=0.05)
    with pytest.raises(InvalidParameterError):
        ball_volume(0.0)


def test_euclidean_comparison_near_identity():
    lower, upper = euclidean_comparison(n=2000, max_radius=1.0, seed=3)
    assert 0.5 < lower <= 1.01
    assert 0.99 <= upper < 2.0
