"""Ground-truth solver tests: best response, equilibrium iteration, welfare
optimum, and the billing fairness comparison."""

import numpy as np
import pytest

from dsmgame.algorithms import Scenario, fixed_point_residual
from dsmgame.feasible import ConsumerSpec, project, sample_feasible
from dsmgame.model import PriceCurve, bill_instantaneous, grid_cost, mapping_profiles
from dsmgame.oracle import (
    ConvergenceError,
    best_response,
    fairness_comparison,
    nash_best_response_iteration,
    social_welfare_optimum,
)
from conftest import REVERSAL_CURVE, REVERSAL_SPECS, make_toy_game


def flat_curve(h, a=1.0, b=1.2, c=0.0):
    return PriceCurve(np.full(h, a), np.full(h, b), np.full(h, c))


# --- best response ----------------------------------------------------------


def test_best_response_single_slot_is_forced():
    spec = ConsumerSpec(np.array([0.0]), np.array([9.0]), 4.0)
    got = best_response(np.array([100.0]), spec, flat_curve(1))
    np.testing.assert_allclose(got, [4.0], atol=1e-10)


def test_best_response_symmetric_split():
    spec = ConsumerSpec(np.zeros(2), np.full(2, 3.0), 2.0)
    got = best_response(np.array([5.0, 5.0]), spec, flat_curve(2))
    np.testing.assert_allclose(got, [1.0, 1.0], atol=1e-7)


def test_best_response_matches_grid_search():
    from oracles import grid_best_response

    rng = np.random.default_rng(19)
    for _ in range(10):
        curve = PriceCurve(
            rng.uniform(0.3, 1.5, 2), rng.choice([1.0, 1.2, 1.5], 2),
            rng.uniform(0, 0.1, 2)
        )
        q_min = rng.uniform(0.0, 0.5, 2)
        q_max = q_min + rng.uniform(0.5, 2.0, 2)
        energy = float(q_min.sum() + 0.5 * (q_max.sum() - q_min.sum()))
        spec = ConsumerSpec(q_min, q_max, energy)
        others = rng.uniform(0.0, 4.0, 2)
        got = best_response(others, spec, curve)
        expected = grid_best_response(others, spec, curve)
        np.testing.assert_allclose(got, expected, atol=1e-3)


def test_best_response_first_order_optimality():
    rng = np.random.default_rng(29)
    for _ in range(10):
        scenario, init = make_toy_game(int(rng.integers(10_000)))
        spec = scenario.specs[0]
        others = init[1:].sum(axis=0) if scenario.n_consumers > 1 else np.zeros(
            scenario.horizon
        )
        q = best_response(others, spec, scenario.curve, tol=1e-8)
        probe = project(q - mapping_profiles(q, q + others, scenario.curve), spec)
        assert np.max(np.abs(q - probe)) <= 1e-8


def test_best_response_rejects_invalid_spec():
    with pytest.raises(ValueError):
        best_response(
            np.zeros(1), ConsumerSpec(np.zeros(1), np.ones(1), 5.0), flat_curve(1)
        )


# --- equilibrium iteration --------------------------------------------------


def test_iteration_single_slot_converges_in_one_sweep():
    specs = tuple(
        ConsumerSpec(np.array([0.0]), np.array([10.0]), float(2 + n))
        for n in range(4)
    )
    scenario = Scenario(specs, flat_curve(1, a=0.5))
    got = nash_best_response_iteration(scenario)
    np.testing.assert_allclose(got[:, 0], [2.0, 3.0, 4.0, 5.0], atol=1e-10)


def test_iteration_reaches_small_residual():
    scenario, _ = make_toy_game(101)
    profiles = nash_best_response_iteration(scenario, tol=1e-7)
    assert fixed_point_residual(profiles, scenario) <= 1e-6


def test_iteration_fixed_point_unique_across_starts():
    scenario, _ = make_toy_game(202)
    rng = np.random.default_rng(55)
    results = []
    for _ in range(10):
        init = np.vstack([sample_feasible(s, rng) for s in scenario.specs])
        results.append(nash_best_response_iteration(scenario, tol=1e-7, init=init))
    for other in results[1:]:
        np.testing.assert_allclose(other, results[0], atol=1e-4)


def test_iteration_rejects_failed_certificate():
    curve = PriceCurve(np.array([0.5]), np.array([8.0]), np.zeros(1))
    specs = (
        ConsumerSpec(np.array([0.0]), np.array([4.0]), 2.0),
        ConsumerSpec(np.array([0.0]), np.array([4.0]), 2.0),
    )
    with pytest.raises(ValueError, match="uniqueness"):
        nash_best_response_iteration(Scenario(specs, curve))


def test_iteration_raises_instead_of_returning_unconverged():
    scenario, init = make_toy_game(303)
    with pytest.raises(ConvergenceError):
        nash_best_response_iteration(scenario, tol=1e-9, max_sweeps=1, init=init)


# --- social welfare ---------------------------------------------------------


def test_welfare_single_slot_cost_is_forced():
    specs = tuple(
        ConsumerSpec(np.array([0.0]), np.array([10.0]), float(1 + n))
        for n in range(3)
    )
    curve = flat_curve(1, a=0.7)
    scenario = Scenario(specs, curve)
    _, cost = social_welfare_optimum(scenario)
    assert cost == pytest.approx(grid_cost(np.array([6.0]), curve))


def test_welfare_single_consumer_matches_best_response():
    spec = ConsumerSpec(np.array([0.2, 0.1]), np.array([3.0, 3.0]), 2.5)
    curve = PriceCurve(np.array([0.4, 1.1]), np.array([1.2, 1.5]), np.zeros(2))
    scenario = Scenario((spec,), curve)
    profiles, cost = social_welfare_optimum(scenario, tol=1e-8)
    br = best_response(np.zeros(2), spec, curve, tol=1e-8)
    np.testing.assert_allclose(profiles[0], br, atol=1e-6)
    assert cost == pytest.approx(bill_instantaneous(br, br, curve), rel=1e-9)


def test_welfare_cost_dominates_equilibrium_and_feasible_points():
    rng = np.random.default_rng(77)
    for seed in (11, 22, 33):
        scenario, init = make_toy_game(seed)
        _, opt_cost = social_welfare_optimum(scenario, tol=1e-8)
        ne = nash_best_response_iteration(scenario, tol=1e-7)
        ne_cost = grid_cost(ne.sum(axis=0), scenario.curve)
        init_cost = grid_cost(init.sum(axis=0), scenario.curve)
        assert opt_cost <= ne_cost + 1e-9
        assert opt_cost <= init_cost + 1e-9
        random_point = np.vstack(
            [sample_feasible(s, rng) for s in scenario.specs]
        )
        assert opt_cost <= grid_cost(random_point.sum(axis=0), scenario.curve) + 1e-9


# --- fairness ---------------------------------------------------------------


def test_identical_consumers_identical_bills():
    spec = ConsumerSpec(np.zeros(2), np.full(2, 4.0), 3.0)
    scenario = Scenario((spec, spec), flat_curve(2))
    profiles = np.array([[1.0, 2.0], [1.0, 2.0]])
    report = fairness_comparison(profiles, scenario)
    assert report.instantaneous_bills[0] == pytest.approx(
        report.instantaneous_bills[1]
    )
    assert report.total_load_bills[0] == pytest.approx(report.total_load_bills[1])


def test_constructed_instance_reverses_the_billing_order():
    scenario = Scenario(REVERSAL_SPECS, REVERSAL_CURVE)
    ne = nash_best_response_iteration(scenario, tol=1e-8)
    assert ne[0, 1] < ne[1, 1]  # A consumes strictly less on-peak
    report = fairness_comparison(ne, scenario)
    assert report.budgets[0] > report.budgets[1]
    assert report.instantaneous_bills[0] < report.instantaneous_bills[1]
    assert report.total_load_bills[0] > report.total_load_bills[1]


def test_bill_sums_agree_between_schemes():
    scenario, init = make_toy_game(404)
    report = fairness_comparison(init, scenario)
    assert report.instantaneous_bills.sum() == pytest.approx(
        report.total_load_bills.sum(), abs=1e-10
    )
