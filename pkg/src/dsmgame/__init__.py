"""Aggregative-game demand-side management simulator: equilibrium seeking via
a central proximal-point iteration, synchronous consensus, and asynchronous
gossip, with billing fairness and peak-shaving analysis tools."""

from .algorithms import (
    RunTrace,
    Scenario,
    SolveResult,
    StepSchedule,
    fixed_point_residual,
    run_algorithm1,
    run_algorithm2,
    run_algorithm3,
)
from .feasible import ConsumerSpec, is_feasible, project, sample_feasible, validate
from .model import (
    Certificate,
    PriceCurve,
    SingularityError,
    aggregate,
    bill_instantaneous,
    bill_total_load,
    grid_cost,
    hessian_diagonal,
    mapping_component,
    monotonicity_certificate,
    par,
    price,
    price_derivative,
    uniqueness_certificate,
)
from .network import (
    CommGraph,
    GossipEvent,
    build_weights,
    generate_topology,
    gossip_stream,
    is_connected,
    load_edge_list,
    save_edge_list,
)
from .oracle import (
    ConvergenceError,
    FairnessReport,
    best_response,
    fairness_comparison,
    nash_best_response_iteration,
    social_welfare_optimum,
)
from .scenario import (
    BaseInterval,
    GenerationRecipe,
    ScenarioFormatError,
    classify_segments,
    default_base_interval,
    generate,
    load_base_interval,
    load_scenario,
    save_scenario,
)

__version__ = "0.1.0"
