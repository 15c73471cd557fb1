"""Independent ground-truth solvers: per-consumer best response, cyclic
best-response equilibrium iteration for small instances, the social-welfare
optimum, and the billing fairness comparison.

These deliberately avoid the algorithm runners' code paths (fixed step
schedules, consensus estimates); they share only the primitive price/
projection layers, so agreement between the two routes is a real check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithms import Scenario
from .feasible import ConsumerSpec, project, validate
from .model import PriceCurve, grid_cost, mapping_profiles, par

_BACKTRACK_LIMIT = 60
_STEP_GROWTH = 1.25


class ConvergenceError(RuntimeError):
    """An oracle solver ran out of iterations before meeting its tolerance."""


def _bill(q: np.ndarray, others: np.ndarray, curve: PriceCurve) -> float:
    return float(curve.price_vector(q + others) @ q)


def best_response(
    others_aggregate,
    spec: ConsumerSpec,
    curve: PriceCurve,
    tol: float = 1e-8,
    max_iter: int = 20_000,
    x0=None,
) -> np.ndarray:
    """Minimize the consumer's bill against a fixed aggregate of the others.

    Projected gradient with backtracking line search on the convex objective;
    stops at probe-step-1 first-order optimality ||q - proj(q - grad)|| <= tol.
    """
    report = validate(spec)
    if report is not None:
        raise ValueError(f"invalid consumer spec: {report}")
    others = np.asarray(others_aggregate, dtype=float)
    if others.shape != (spec.horizon,) or np.any(others < 0):
        raise ValueError("others_aggregate must be a nonnegative length-H vector")

    q = project(0.5 * (spec.q_min + spec.q_max) if x0 is None else x0, spec)
    fval = _bill(q, others, curve)
    step = 1.0
    move = np.inf
    for it in range(max_iter):
        grad = mapping_profiles(q, q + others, curve)
        # near the optimum the line search accepts float-noise-scale moves,
        # so once steps are small the first-order certificate is checked
        # every iteration to catch the sub-tolerance dips
        if move <= 100.0 * tol or it % 10 == 9:
            probe = project(q - grad, spec)
            if float(np.max(np.abs(q - probe))) <= tol:
                return q
        for _ in range(_BACKTRACK_LIMIT):
            cand = project(q - step * grad, spec)
            delta = cand - q
            cand_val = _bill(cand, others, curve)
            bound = fval + grad @ delta + (delta @ delta) / (2.0 * step)
            if cand_val <= bound + 1e-15 * (1.0 + abs(fval)):
                break
            step *= 0.5
        move = float(np.max(np.abs(delta)))
        q, fval = cand, cand_val
        step *= _STEP_GROWTH
    raise ConvergenceError(
        f"best response not within {tol:g} after {max_iter} iterations"
    )


def nash_best_response_iteration(
    scenario: Scenario,
    tol: float = 1e-7,
    max_sweeps: int = 500,
    init=None,
) -> np.ndarray:
    """Cyclic best-response sweeps to the game's fixed point.

    Intended for small instances (a handful of consumers and slots); raises
    ConvergenceError instead of returning a non-converged state.
    """
    if scenario.certificate is not None and not scenario.certificate.holds:
        raise ValueError("scenario fails the uniqueness certificate")
    if init is None:
        q = np.vstack(
            [project(0.5 * (s.q_min + s.q_max), s) for s in scenario.specs]
        )
    else:
        q = np.atleast_2d(np.asarray(init, dtype=float)).copy()
    # inner solves to the fixed 1e-8 target; tighter is not certifiable
    # through the probe projection once bill differences hit float noise
    inner_tol = max(min(1e-8, tol / 10.0), 1e-8)
    for _ in range(max_sweeps):
        sweep_change = 0.0
        total = q.sum(axis=0)
        for n, spec in enumerate(scenario.specs):
            others = total - q[n]
            updated = best_response(
                others, spec, scenario.curve, tol=inner_tol, x0=q[n]
            )
            sweep_change = max(sweep_change, float(np.max(np.abs(updated - q[n]))))
            total += updated - q[n]
            q[n] = updated
        if sweep_change <= tol:
            return q
    raise ConvergenceError(
        f"best-response iteration not within {tol:g} after {max_sweeps} sweeps"
    )


def social_welfare_optimum(
    scenario: Scenario,
    tol: float = 1e-8,
    max_iter: int = 50_000,
    init=None,
) -> tuple[np.ndarray, float]:
    """Minimize the summed bills (the grid cost) over the joint feasible set.

    Projected gradient with backtracking on the joint profile; the objective
    depends on the aggregate only, so the optimal cost is unique even though
    the optimal split between consumers need not be.
    """
    if init is None:
        q = np.vstack(
            [project(0.5 * (s.q_min + s.q_max), s) for s in scenario.specs]
        )
    else:
        q = np.atleast_2d(np.asarray(init, dtype=float)).copy()
    curve = scenario.curve

    def joint_grad(profiles: np.ndarray) -> np.ndarray:
        sigma = profiles.sum(axis=0)
        row = curve.price_derivative_vector(sigma) * sigma + curve.price_vector(sigma)
        return np.broadcast_to(row, profiles.shape)

    fval = grid_cost(q.sum(axis=0), curve)
    step = 1.0
    for _ in range(max_iter):
        grad = joint_grad(q)
        probe = scenario.project(q - grad)
        if float(np.max(np.abs(q - probe))) <= tol:
            return q, fval
        for _ in range(_BACKTRACK_LIMIT):
            cand = probe if step == 1.0 else scenario.project(q - step * grad)
            delta = cand - q
            cand_val = grid_cost(cand.sum(axis=0), curve)
            bound = fval + float(np.sum(grad * delta)) + float(
                np.sum(delta * delta)
            ) / (2.0 * step)
            if cand_val <= bound + 1e-15 * (1.0 + abs(fval)):
                break
            step *= 0.5
        q, fval = cand, cand_val
        step *= _STEP_GROWTH
    raise ConvergenceError(
        f"welfare optimum not within {tol:g} after {max_iter} iterations"
    )


@dataclass(frozen=True)
class FairnessReport:
    """Per-consumer billing outcomes under both schemes, plus individual
    peak-to-average ratios; both bill columns sum to the grid cost."""

    budgets: np.ndarray
    instantaneous_bills: np.ndarray
    total_load_bills: np.ndarray
    consumer_par: np.ndarray


def fairness_comparison(profiles, scenario: Scenario) -> FairnessReport:
    """Compare instantaneous-load and total-load billing at given profiles."""
    q = np.atleast_2d(np.asarray(profiles, dtype=float))
    if q.shape != (scenario.n_consumers, scenario.horizon):
        raise ValueError(
            f"profiles must have shape ({scenario.n_consumers}, {scenario.horizon})"
        )
    sigma = q.sum(axis=0)
    prices = scenario.curve.price_vector(sigma)
    cost = float(prices @ sigma)
    budgets = scenario.budgets
    return FairnessReport(
        budgets=budgets.copy(),
        instantaneous_bills=q @ prices,
        total_load_bills=budgets / budgets.sum() * cost,
        consumer_par=np.array([par(row) for row in q]),
    )
