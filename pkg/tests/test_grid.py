from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weighted_semigroup.errors import DataError, DomainError, ResolutionError
from weighted_semigroup.grid import (Grid, GridFunction, backward_difference, bump,
                                     difference_matrix, differentiate, forward_difference,
                                     integrate, random_band_limited)

from conftest import masked


@pytest.mark.parametrize("dim, n", [(0, 16), (4, 16), (1, 14), (1, 17), (2, 8)])
def test_grid_rejects_bad_shape(dim, n):
    with pytest.raises(DomainError):
        Grid(dim, 1.0, n)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_grid_geometry(dim):
    g = Grid(dim, 2.0, 16)
    assert g.spacing == g.h == 0.25
    assert g.shape == (16,) * dim
    pts = g.points()
    assert pts.shape == (16,) * dim + (dim,)
    assert pts.min() == -2.0 and pts.max() < 2.0
    assert g.refined().n == 32


@pytest.mark.parametrize("dim, L", [(1, 1.0), (2, 3.0), (3, 0.5)])
def test_integral_of_one_is_box_volume(dim, L):
    g = Grid(dim, L, 16)
    assert integrate(GridFunction(g, np.ones(g.shape))) == pytest.approx((2 * L) ** dim, rel=1e-14)


def test_integrate_zero_and_unit_box():
    g = Grid(1, 1.0, 16)
    assert integrate(g.zeros()) == 0.0
    assert integrate(GridFunction(g, np.ones(16))) == 2.0


def test_integrate_sin_squared(pi_grid):
    f = pi_grid.function(lambda p: np.sin(p[..., 0]) ** 2)
    assert abs(integrate(f) - np.pi) < 1e-6


def test_grid_function_validation():
    g = Grid(1, 1.0, 16)
    with pytest.raises(DataError):
        GridFunction(g, np.ones(15))
    bad = np.ones(16)
    bad[3] = np.nan
    with pytest.raises(DataError):
        GridFunction(g, bad)
    assert GridFunction(Grid(2, 1.0, 16), np.ones(256)).values.shape == (16, 16)


def test_derivative_of_constant_vanishes_inside():
    g = Grid(1, 1.0, 32)
    d = differentiate(GridFunction(g, np.ones(32)), 0).values
    # zero padding only shows at the two edge nodes
    assert np.all(d[1:-1] == 0.0)


def test_axis_out_of_range():
    g = Grid(1, 1.0, 16)
    with pytest.raises(DomainError):
        differentiate(g.zeros(), 1)


def test_central_difference_of_sine(pi_grid):
    f = pi_grid.function(lambda p: np.sin(p[..., 0]))
    i0 = pi_grid.nearest_index(0.0)
    d = differentiate(f, 0).values[i0]
    assert abs(d - 1.0) < pi_grid.h**2


@pytest.mark.parametrize("order", [1, 2])
def test_differentiation_is_second_order(order):
    errors = []
    for n in (128, 256):
        g = Grid(1, np.pi, n)
        f = masked(g, lambda p: np.sin(p[..., 0]))
        fine = Grid(1, np.pi, 8 * n)
        ref = masked(fine, lambda p: np.sin(p[..., 0]))
        exact = differentiate(ref, 0, order).values[::8]
        errors.append(np.max(np.abs(differentiate(f, 0, order).values - exact)))
    # the reference carries an h^2/64 error of its own
    assert 3.5 <= errors[0] / errors[1] <= 4.5


def test_mixed_derivatives_commute_exactly():
    g = Grid(2, 4.0, 32)
    rng = np.random.default_rng(1)
    f = GridFunction(g, rng.integers(-8, 8, g.shape).astype(float))
    a = differentiate(differentiate(f, 0), 1).values
    b = differentiate(differentiate(f, 1), 0).values
    assert np.array_equal(a, b)


def test_summation_by_parts_is_exact_on_dyadic_data():
    g = Grid(1, 4.0, 32)
    rng = np.random.default_rng(2)
    vals = np.zeros((2, 32))
    vals[:, 4:-4] = rng.integers(-16, 16, (2, 24))
    f, gg = GridFunction(g, vals[0]), GridFunction(g, vals[1])
    lhs = integrate(GridFunction(g, forward_difference(f, 0).values * gg.values))
    rhs = -integrate(GridFunction(g, f.values * backward_difference(gg, 0).values))
    assert lhs == rhs


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_differentiation_is_linear(seed, a, b):
    g = Grid(2, 2.0, 16)
    rng = np.random.default_rng(seed)
    f, h = (GridFunction(g, rng.standard_normal(g.shape)) for _ in range(2))
    lhs = differentiate(f * a + h * b, 1).values
    rhs = a * differentiate(f, 1).values + b * differentiate(h, 1).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


@pytest.mark.parametrize("kind", ["forward", "backward"])
def test_difference_matrix_matches_stencil(kind):
    g = Grid(2, 1.0, 16)
    f = GridFunction(g, np.random.default_rng(3).standard_normal(g.shape))
    op = forward_difference if kind == "forward" else backward_difference
    for axis in range(2):
        np.testing.assert_allclose(difference_matrix(g, axis, kind) @ f.flat,
                                   op(f, axis).flat, atol=1e-12)


def test_random_band_limited_is_deterministic_and_supported(grid1d):
    a = random_band_limited(grid1d, 5, 16, 1.0)
    b = random_band_limited(grid1d, 5, 16, 1.0)
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values[grid1d.radius() >= 0.8 * grid1d.half_width] == 0.0)


def test_random_band_limited_seeds_differ(grid1d):
    a = random_band_limited(grid1d, 1, 16, 1.0)
    b = random_band_limited(grid1d, 2, 16, 1.0)
    # seeded members have L2 norms of order one; distinct seeds stay far apart
    dist = np.sqrt(integrate((a - b) * (a - b)))
    assert dist > 0.1


def test_random_band_limited_is_grid_independent():
    coarse, fine = Grid(1, 8.0, 128), Grid(1, 8.0, 256)
    a = random_band_limited(coarse, 3, 8, 1.0).values
    b = random_band_limited(fine, 3, 8, 1.0).values[::2]
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_random_band_limited_rejects_unresolved_modes():
    with pytest.raises(ResolutionError):
        random_band_limited(Grid(1, 8.0, 64), 0, 17, 1.0)
    with pytest.raises(DomainError):
        random_band_limited(Grid(1, 8.0, 64), 0, 4, 0.0)


def test_bump_is_one_at_origin_and_vanishes_outside():
    r = np.array([0.0, 0.5, 1.0, 2.0])
    b = bump(r, 1.0)
    assert b[0] == 1.0 and 0 < b[1] < 1 and b[2] == 0.0 and b[3] == 0.0


def test_delta_has_unit_mass():
    g = Grid(2, 1.0, 16)
    assert integrate(g.delta((8, 8))) == pytest.approx(1.0, rel=1e-14)


def test_nearest_index_outside_raises():
    with pytest.raises(DomainError):
        Grid(1, 1.0, 16).nearest_index(5.0)
