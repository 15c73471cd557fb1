"""Command-line front end: generate scenarios, run the solvers, run the
oracles, and emit CSV/JSON report data.

Exit codes: 0 success, 1 usage/argument error, 2 runtime failure (including
non-convergence under --strict). Every JSON output embeds the scenario
content hash and the full flag set for provenance.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import algorithms, network, oracle, scenario as scen
from .feasible import sample_feasible
from .model import aggregate, grid_cost, par


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the artifact reserves 2
    # for runtime failures, so remap.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: error: {message}", 1)


def _flags(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_generate(args) -> int:
    base = (
        scen.load_base_interval(args.base)
        if args.base
        else scen.default_base_interval()
    )
    recipe = scen.GenerationRecipe(
        n_consumers=args.n, horizon=args.horizon, seed=args.seed, jitter=args.jitter
    )
    scenario, initials = scen.generate(recipe, base)
    sha = scen.save_scenario(args.out, scenario, initials)
    print(f"wrote scenario {args.out} (N={args.n}, H={args.horizon}, hash {sha[:12]})")
    return 0


def _load_graph(args, loaded: scen.LoadedScenario, rng) -> network.CommGraph:
    if args.graph:
        return network.load_edge_list(args.graph, loaded.scenario.n_consumers)
    if args.topology == "random":
        return network.generate_topology(
            loaded.scenario.n_consumers, args.degree, rng
        )
    raise CliError(
        "algorithms 2 and 3 need --graph PATH or --topology random [--degree D]", 1
    )


def cmd_run(args) -> int:
    loaded = scen.load_scenario(args.scenario)
    scenario = loaded.scenario
    rng = np.random.default_rng(args.seed)
    if loaded.initial_profiles is not None:
        init = loaded.initial_profiles
    else:
        init = np.vstack([sample_feasible(spec, rng) for spec in scenario.specs])
    schedule = algorithms.StepSchedule.power_decay(args.step_exponent)

    if args.alg == 1:
        result, trace = algorithms.run_algorithm1(
            scenario,
            theta=args.theta,
            schedule=schedule,
            init=init,
            tol=args.tol,
            max_iter=args.max_iter,
        )
    elif args.alg == 2:
        graph = _load_graph(args, loaded, rng)
        weights = network.build_weights(graph, args.tau)
        result, trace = algorithms.run_algorithm2(
            scenario,
            graph,
            weights,
            schedule=schedule,
            init=init,
            tol=args.tol,
            max_iter=args.max_iter,
        )
    else:
        graph = _load_graph(args, loaded, rng)
        events = network.gossip_stream(graph, rng, args.max_events)
        result, trace = algorithms.run_algorithm3(
            scenario,
            graph,
            events,
            init=init,
            tol=args.tol,
            max_events=args.max_events,
        )

    trace.to_csv(args.trace)
    final = result.final_profiles
    summary = {
        "command": "run",
        "algorithm": args.alg,
        "scenario_hash": loaded.content_hash,
        "flags": _flags(args),
        "converged": result.converged,
        "iterations": result.iterations,
        "residual": result.residual,
        "fixed_point_residual": result.fixed_point_residual,
        "uniqueness": "verified" if result.uniqueness_verified else "unverified",
        "initial_par": par(aggregate(init)),
        "final_par": par(aggregate(final)),
        "total_cost": grid_cost(aggregate(final), scenario.curve),
        "final_profiles": final.tolist(),
    }
    _write_json(args.summary, summary)
    status = "converged" if result.converged else "not converged"
    print(
        f"algorithm {args.alg}: {status} after {result.iterations} iterations, "
        f"residual {result.residual:.3e}, PAR {summary['initial_par']:.4f} -> "
        f"{summary['final_par']:.4f}"
    )
    if not result.uniqueness_verified:
        print("warning: uniqueness certificate failed; convergence unguaranteed")
    if args.strict and not result.converged:
        raise CliError("run did not converge within budget (--strict)", 2)
    return 0


def cmd_oracle(args) -> int:
    loaded = scen.load_scenario(args.scenario)
    scenario = loaded.scenario
    if args.kind == "nash":
        if scenario.n_consumers > 6 or scenario.horizon > 6:
            raise CliError(
                f"nash oracle is restricted to N <= 6 and H <= 6 (got N="
                f"{scenario.n_consumers}, H={scenario.horizon})",
                1,
            )
        profiles = oracle.nash_best_response_iteration(scenario, tol=args.tol)
        cost = float(
            sum(
                scenario.curve.price_vector(profiles.sum(axis=0)) @ profiles[n]
                for n in range(scenario.n_consumers)
            )
        )
        payload = {
            "command": "oracle",
            "kind": "nash",
            "scenario_hash": loaded.content_hash,
            "flags": _flags(args),
            "profiles": profiles.tolist(),
            "residual": algorithms.fixed_point_residual(profiles, scenario),
            "total_cost": cost,
        }
    else:
        profiles, cost = oracle.social_welfare_optimum(scenario, tol=args.tol)
        payload = {
            "command": "oracle",
            "kind": "welfare",
            "scenario_hash": loaded.content_hash,
            "flags": _flags(args),
            "profiles": profiles.tolist(),
            "total_cost": cost,
        }
    _write_json(args.out, payload)
    print(f"{args.kind} oracle: total cost {payload['total_cost']:.6f}")
    return 0


def _require_matching_hashes(*payloads) -> str:
    hashes = {p["scenario_hash"] for p in payloads}
    if len(hashes) != 1:
        raise CliError(
            f"inputs were produced from different scenarios: {sorted(hashes)}", 1
        )
    return hashes.pop()


def cmd_report(args) -> int:
    if args.kind == "par":
        summary = _read_json(args.summary)
        initial, final = summary["initial_par"], summary["final_par"]
        _write_json(
            args.out,
            {
                "command": "report",
                "kind": "par",
                "scenario_hash": summary["scenario_hash"],
                "flags": _flags(args),
                "initial_par": initial,
                "final_par": final,
                "relative_reduction": (initial - final) / initial,
            },
        )
        print(f"PAR {initial:.4f} -> {final:.4f} ({(initial - final) / initial:.2%})")
    elif args.kind == "fairness":
        loaded = scen.load_scenario(args.scenario)
        summary = _read_json(args.summary)
        if summary["scenario_hash"] != loaded.content_hash:
            raise CliError(
                "run summary was produced from a different scenario file", 1
            )
        profiles = np.array(summary["final_profiles"], dtype=float)
        report = oracle.fairness_comparison(profiles, loaded.scenario)
        _write_json(
            args.out,
            {
                "command": "report",
                "kind": "fairness",
                "scenario_hash": loaded.content_hash,
                "flags": _flags(args),
                "consumer": list(range(1, loaded.scenario.n_consumers + 1)),
                "energy_budget": report.budgets.tolist(),
                "instantaneous_bill": report.instantaneous_bills.tolist(),
                "total_load_bill": report.total_load_bills.tolist(),
                "consumer_par": report.consumer_par.tolist(),
            },
        )
        print(f"fairness table for {loaded.scenario.n_consumers} consumers written")
    elif args.kind == "welfare-gap":
        summary = _read_json(args.summary)
        optimum = _read_json(args.oracle)
        sha = _require_matching_hashes(summary, optimum)
        ne_cost, opt_cost = summary["total_cost"], optimum["total_cost"]
        _write_json(
            args.out,
            {
                "command": "report",
                "kind": "welfare-gap",
                "scenario_hash": sha,
                "flags": _flags(args),
                "ne_total_cost": ne_cost,
                "optimal_total_cost": opt_cost,
                "relative_gap": (ne_cost - opt_cost) / opt_cost,
            },
        )
        print(f"welfare gap {(ne_cost - opt_cost) / opt_cost:.4%}")
    else:  # convergence
        wanted = (
            {int(x) for x in args.consumers.split(",")} if args.consumers else None
        )
        with open(args.trace, "r", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            t_col, n_col, cost_col = (
                header.index("t"),
                header.index("n"),
                header.index("cost"),
            )
            rows = [
                (row[t_col], row[n_col], row[cost_col])
                for row in reader
                if wanted is None or int(row[n_col]) in wanted
            ]
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "n", "cost"])
            writer.writerows(rows)
        print(f"convergence series with {len(rows)} rows written")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dsmgame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a scenario file")
    p.add_argument("--n", type=int, default=50, help="number of consumers")
    p.add_argument("--h", dest="horizon", type=int, default=24, help="time slots")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--base", help="base-interval CSV (default: packaged curve)")
    p.add_argument("-o", "--out", required=True, help="output scenario JSON")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run one of the solvers on a scenario")
    p.add_argument("scenario", help="scenario JSON produced by generate")
    p.add_argument("--alg", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=algorithms.DEFAULT_THETA)
    p.add_argument(
        "--step-exponent", type=float, default=algorithms.DEFAULT_EXPONENT
    )
    p.add_argument("--tau", type=float, default=algorithms.DEFAULT_TAU)
    p.add_argument("--tol", type=float, default=algorithms.DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--max-events", type=int, default=5000)
    p.add_argument("--graph", help="edge-list file for algorithms 2/3")
    p.add_argument("--topology", choices=("random",), help="generate a topology")
    p.add_argument("--degree", type=float, default=3.0)
    p.add_argument("--trace", required=True, help="output trace CSV")
    p.add_argument("--summary", required=True, help="output summary JSON")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="run a ground-truth solver")
    p.add_argument("scenario")
    p.add_argument("--kind", choices=("nash", "welfare"), required=True)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="derive report data from run artifacts")
    p.add_argument(
        "--kind", choices=("par", "fairness", "welfare-gap", "convergence"),
        required=True,
    )
    p.add_argument("--scenario", help="scenario JSON (fairness)")
    p.add_argument("--summary", help="run summary JSON (par/fairness/welfare-gap)")
    p.add_argument("--oracle", help="welfare oracle JSON (welfare-gap)")
    p.add_argument("--trace", help="trace CSV (convergence)")
    p.add_argument("--consumers", help="comma-separated 1-based ids (convergence)")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


_REQUIRED_INPUTS = {
    "par": ("summary",),
    "fairness": ("scenario", "summary"),
    "welfare-gap": ("summary", "oracle"),
    "convergence": ("trace",),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "report":
            missing = [
                f"--{name}"
                for name in _REQUIRED_INPUTS[args.kind]
                if getattr(args, name) is None
            ]
            if missing:
                raise CliError(
                    f"report --kind {args.kind} needs {', '.join(missing)}", 1
                )
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except oracle.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
