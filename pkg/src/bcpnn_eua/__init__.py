"""BCPNN winner-takes-all attractor solver for the edge user allocation problem."""

from .dynamics import NetworkParams, NetworkState
from .generator import GeneratorConfig, generate_instance
from .heuristics import HeuristicParams, InputGenerator, LoadbiasConfigError, build_loadbias
from .instance import (
    Allocation,
    EvalResult,
    Instance,
    InstanceError,
    ResourceVector,
    Server,
    User,
    evaluate_allocation,
    load_instance,
    parse_instance,
    render_instance,
)
from .oracle import BudgetExhausted, OracleResult, exact_solve, greedy_solve, performance_gap
from .solver import SolverConfig, repair, solve

__all__ = [
    "Allocation", "BudgetExhausted", "EvalResult", "GeneratorConfig", "HeuristicParams",
    "InputGenerator", "Instance", "InstanceError", "LoadbiasConfigError", "NetworkParams",
    "NetworkState", "OracleResult", "ResourceVector", "Server", "SolverConfig", "User",
    "build_loadbias", "evaluate_allocation", "exact_solve", "generate_instance", "greedy_solve",
    "load_instance", "parse_instance", "performance_gap", "render_instance", "repair", "solve",
]
