from __future__ import annotations

import csv
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import expm_multiply

from weighted_semigroup.elliptic import DiscreteOperator, assemble_A, identity, trigonometric
from weighted_semigroup.errors import DomainError, SolverError
from weighted_semigroup.grid import Grid, bump, integrate, random_band_limited
from weighted_semigroup.semigroup import (SCHEMES, EvolutionConfig, Propagator, Stepper,
                                          check_commutation_with_A, check_semigroup_property,
                                          default_dt, evolve, exact_evolver, exact_heat,
                                          scheme_evolver, step_plan, write_trajectory_csv)


def gaussian(grid, width=1.0):
    return grid.function(lambda p: np.exp(-np.sum(p**2, axis=-1) / (2 * width**2)))


@pytest.fixture
def trig_op(grid1d):
    return assemble_A(trigonometric(1), grid1d)


def test_config_validation():
    with pytest.raises(DomainError):
        EvolutionConfig("forward_euler")
    with pytest.raises(DomainError):
        EvolutionConfig(dt=0.0)
    with pytest.raises(DomainError):
        EvolutionConfig(t_final=-1.0)


@pytest.mark.parametrize("duration, dt, steps", [(1.0, 0.1, 10), (1.0, 0.3, 4), (0.5, 0.5, 1),
                                                 (0.0, 0.1, 0), (0.3, 0.1, 3)])
def test_step_plan_lands_exactly(duration, dt, steps):
    n, eff = step_plan(duration, dt)
    assert n == steps
    if n:
        assert eff <= dt * (1 + 1e-12)
        assert n * eff == pytest.approx(duration, rel=1e-14)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_zero_time_returns_input(trig_op, grid1d, scheme):
    f = random_band_limited(grid1d, 0, 16, 1.0)
    assert np.array_equal(evolve(trig_op, f, EvolutionConfig(scheme, 0.01, 0.0)).values, f.values)


def test_gaussian_peak_decays_as_closed_form(grid1d):
    A = assemble_A(identity(1), grid1d)
    u = evolve(A, gaussian(grid1d), EvolutionConfig("crank_nicolson", default_dt(grid1d), 0.5))
    assert u.values[grid1d.nearest_index(0.0)] == pytest.approx(1 / math.sqrt(2), abs=2e-4)


def test_implicit_euler_never_grows(trig_op, grid1d):
    f = random_band_limited(grid1d, 3, 32, 1.0)
    _, traj = evolve(trig_op, f, EvolutionConfig("implicit_euler", 0.01, 0.3, store_trajectory=True))
    norms = [np.linalg.norm(g.values) for _, g in traj]
    assert len(traj) == 31
    assert all(b <= a * (1 + 1e-10) for a, b in zip(norms, norms[1:]))


def test_growth_on_non_positive_operator_raises():
    g = Grid(1, 1.0, 16)
    neg = DiscreteOperator(-sp.identity(g.size, format="csr"), g)
    with pytest.raises(SolverError, match="grew"):
        Stepper(neg, "implicit_euler", 0.1).step(np.ones(g.size))
    lax = Stepper(neg, "implicit_euler", 0.1, strict=False)
    lax.step(np.ones(g.size))
    assert lax.max_growth > 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 1000), st.floats(-5, 5), st.floats(-5, 5))
def test_evolution_is_linear(s1, s2, a, b):
    g = Grid(1, 8.0, 64)
    A = assemble_A(trigonometric(1), g)
    f, h = random_band_limited(g, s1, 8, 1.0), random_band_limited(g, s2, 8, 1.0)
    cfg = EvolutionConfig("crank_nicolson", 0.01, 0.1)
    lhs = evolve(A, f * a + h * b, cfg).values
    rhs = a * evolve(A, f, cfg).values + b * evolve(A, h, cfg).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


@pytest.mark.parametrize("scheme, lo, hi", [("implicit_euler", 1.7, 2.3),
                                            ("crank_nicolson", 3.4, 4.6)])
def test_time_convergence_order(scheme, lo, hi):
    g = Grid(1, 8.0, 128)
    A = assemble_A(trigonometric(1), g)
    f = random_band_limited(g, 1, 8, 1.0)
    ref = expm_multiply(-0.5 * A.matrix, f.flat)
    errors = [np.linalg.norm(evolve(A, f, EvolutionConfig(scheme, dt, 0.5)).flat - ref)
              for dt in (0.02, 0.01, 0.005)]
    for coarse, fine in zip(errors, errors[1:]):
        assert lo <= coarse / fine <= hi


def test_space_time_convergence_against_exact_heat():
    errors = []
    for n in (128, 256, 512):
        g = Grid(1, 8.0, n)
        f = gaussian(g)
        u = evolve(assemble_A(identity(1), g), f, EvolutionConfig("crank_nicolson", default_dt(g), 0.5))
        ex = exact_heat(1.0, f, 0.5)
        errors.append(np.linalg.norm(u.flat - ex.flat) / np.linalg.norm(ex.flat))
    assert errors[1] < 1e-3
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.4 <= coarse / fine <= 4.6


def test_exact_heat_identity_and_delta(grid1d):
    f = random_band_limited(grid1d, 2, 16, 1.0)
    assert np.array_equal(exact_heat(1.0, f, 0.0).values, f.values)
    i0 = grid1d.nearest_index(0.0)
    u = exact_heat(1.0, grid1d.delta(i0), 0.25)
    assert u.values[i0] == pytest.approx(1 / math.sqrt(math.pi), rel=1e-12)
    with pytest.raises(DomainError):
        exact_heat(0.0, f, 1.0)
    with pytest.raises(DomainError):
        exact_heat(1.0, f, -1.0)


@pytest.mark.parametrize("dim", [1, 2])
def test_exact_heat_conserves_mass(dim):
    g = Grid(dim, 8.0, 128)
    # supported in |x| < 2, so the spread over t = 0.3 stays inside the box
    f = g.function(lambda p: bump(np.sqrt(np.sum(p**2, axis=-1)), 2.0) * (1 + 0.5 * np.cos(3 * p[..., 0])))
    assert integrate(exact_heat(1.0, f, 0.3)) == pytest.approx(integrate(f), abs=1e-8)


def test_exact_heat_is_separable_in_2d():
    g = Grid(2, 8.0, 64)
    u = exact_heat(0.5, gaussian(g), 0.4)
    # Gaussian variance grows by 2 c t along each axis
    assert u.values[g.nearest_index([0.0, 0.0])] == pytest.approx(1 / (1 + 2 * 0.5 * 0.4), rel=1e-6)


def test_semigroup_defects(grid1d, trig_op):
    f = random_band_limited(grid1d, 5, 16, 1.0)
    assert check_semigroup_property(scheme_evolver(trig_op), f, 0.3, 0.0) == 0.0
    assert check_semigroup_property(exact_evolver(1.0), gaussian(grid1d), 0.3, 0.2) < 1e-8
    with pytest.raises(DomainError):
        check_semigroup_property(exact_evolver(1.0), f, -0.1, 0.1)


def test_semigroup_defect_vanishes_under_refinement(grid1d, trig_op):
    f = random_band_limited(grid1d, 5, 16, 1.0)
    defects = [check_semigroup_property(scheme_evolver(trig_op, "implicit_euler", dt), f, 0.35, 0.2)
               for dt in (0.03, 0.003, 0.0003)]
    # mismatched effective steps only; bounded by a first-order model and shrinking
    assert all(d <= 0.5 * dt for d, dt in zip(defects, (0.03, 0.003, 0.0003)))
    assert defects[2] < defects[0]
    # commensurate steps take identical paths
    assert check_semigroup_property(scheme_evolver(trig_op, "implicit_euler", 0.0625), f, 0.375, 0.25) == 0.0


@pytest.mark.parametrize("scheme", SCHEMES)
def test_scheme_commutes_with_operator(grid1d, trig_op, scheme):
    f = random_band_limited(grid1d, 6, 16, 1.0)
    ev = scheme_evolver(trig_op, scheme, 0.01)
    assert check_commutation_with_A(trig_op, ev, f, 0.0) == 0.0
    assert check_commutation_with_A(trig_op, ev, f, 0.2) <= 1e-9


def test_exact_heat_commutes_with_constant_operator(grid1d):
    f = gaussian(grid1d, width=math.sqrt(0.5))
    A = assemble_A(identity(1), grid1d)
    assert check_commutation_with_A(A, exact_evolver(1.0), f, 0.1) <= 1e-8


def test_propagator_batches_and_caches(grid1d, trig_op):
    prop = Propagator(trig_op, "crank_nicolson", 0.01)
    vals = np.stack([random_band_limited(grid1d, s, 16, 1.0).flat for s in range(3)], axis=1)
    states = prop.at_times(vals, [0.1, 0.25])
    single = evolve(trig_op, random_band_limited(grid1d, 1, 16, 1.0),
                    EvolutionConfig("crank_nicolson", 0.01, 0.1))
    np.testing.assert_allclose(states[0][:, 1], single.flat, atol=1e-13)
    assert len(prop._steppers) == 1
    with pytest.raises(DomainError):
        prop.at_times(vals, [0.2, 0.1])


def test_trajectory_csv(tmp_path):
    g = Grid(1, 1.0, 16)
    A = assemble_A(identity(1), g)
    _, traj = evolve(A, gaussian(g, 0.2), EvolutionConfig("implicit_euler", 0.01, 0.02, True))
    path = write_trajectory_csv(tmp_path / "traj.csv", traj)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "x0", "value"]
    assert len(rows) == 1 + 3 * 16
    assert float(rows[-1][0]) == pytest.approx(0.02)
