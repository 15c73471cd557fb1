#!/usr/bin/env python3
"""Cross-validate the three solvers against the best-response oracle on a
batch of small random games and print an agreement table.

Usage:
    python scripts/oracle_check.py --games 10 --events 2500
"""

import argparse

import numpy as np

from dsmgame.algorithms import (
    Scenario,
    fixed_point_residual,
    run_algorithm1,
    run_algorithm2,
    run_algorithm3,
)
from dsmgame.feasible import ConsumerSpec, sample_feasible
from dsmgame.model import PriceCurve
from dsmgame.network import CommGraph, build_weights, gossip_stream
from dsmgame.oracle import nash_best_response_iteration


def random_game(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    h = int(rng.integers(2, 4))
    curve = PriceCurve(
        rng.uniform(1.0, 2.2, h), rng.choice([1.0, 1.2], h), rng.uniform(0, 0.1, h)
    )
    specs = []
    for _ in range(n):
        q_min = rng.uniform(0.3, 0.8, h)
        q_max = q_min + rng.uniform(1.0, 2.0, h)
        energy = float(q_min.sum() + rng.uniform(0.35, 0.65) * (q_max - q_min).sum())
        specs.append(ConsumerSpec(q_min, q_max, energy))
    scenario = Scenario(tuple(specs), curve)
    init = np.vstack([sample_feasible(s, rng) for s in scenario.specs])
    return scenario, init


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--games", type=int, default=10)
    ap.add_argument("--events", type=int, default=2500)
    ap.add_argument("--seed0", type=int, default=1)
    args = ap.parse_args()

    print(f"{'game':>4} {'N':>2} {'H':>2} {'oracle-res':>10} "
          f"{'alg1':>9} {'alg2':>9} {'alg3':>9}")
    worst = 0.0
    for k in range(args.games):
        seed = args.seed0 + k
        scenario, init = random_game(seed)
        n = scenario.n_consumers
        graph = CommGraph(
            n, frozenset((a, b) for a in range(n) for b in range(a + 1, n))
        )
        ne = nash_best_response_iteration(scenario, tol=1e-7)
        res = fixed_point_residual(ne, scenario)
        r1, _ = run_algorithm1(scenario, init=init, tol=1e-7, max_iter=4000)
        r2, _ = run_algorithm2(
            scenario, graph, build_weights(graph, 0.5), init=init, tol=1e-7,
            max_iter=4000,
        )
        events = gossip_stream(graph, np.random.default_rng(seed), args.events)
        r3, _ = run_algorithm3(
            scenario, graph, events, init=init, tol=1e-6, max_events=args.events
        )
        gaps = [
            float(np.max(np.abs(r.final_profiles - ne))) for r in (r1, r2, r3)
        ]
        worst = max(worst, *gaps)
        print(f"{seed:>4} {n:>2} {scenario.horizon:>2} {res:>10.2e} "
              f"{gaps[0]:>9.2e} {gaps[1]:>9.2e} {gaps[2]:>9.2e}")
    print(f"worst deviation from the oracle: {worst:.2e}")


if __name__ == "__main__":
    main()
