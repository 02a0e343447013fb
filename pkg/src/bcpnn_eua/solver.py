"""The BCPNN-EUA solve loop: b0 sweep, stability termination, decode and repair."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dynamics import NetworkParams, init_network, step
from .heuristics import HeuristicParams, InputGenerator, build_loadbias
from .instance import (
    CAPACITY_EPS,
    Allocation,
    EvalResult,
    Instance,
    evaluate_allocation,
    largeness_resource,
    score_value,
    server_loads,
)

DEFAULT_B0_SCHEDULE = (-180.0, -50.0, -40.0, -30.0, -20.0, -10.0)


@dataclass(frozen=True)
class SolverConfig:
    b0_schedule: tuple[float, ...] = DEFAULT_B0_SCHEDULE
    max_timesteps_per_b0: int = 150
    stability_window: int = 5
    seed: int = 0
    network: NetworkParams = field(default_factory=NetworkParams)
    heuristics: HeuristicParams = field(default_factory=HeuristicParams)

    def __post_init__(self):
        object.__setattr__(self, "b0_schedule", tuple(float(b) for b in self.b0_schedule))
        if not self.b0_schedule:
            raise ValueError("b0 schedule must not be empty")
        if self.stability_window < 1:
            raise ValueError("stability_window must be >= 1")
        if self.max_timesteps_per_b0 < 1:
            raise ValueError("max_timesteps_per_b0 must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict:
        return {
            "b0_schedule": list(self.b0_schedule),
            "max_timesteps_per_b0": self.max_timesteps_per_b0,
            "stability_window": self.stability_window,
            "seed": self.seed,
            "network": {
                "alpha": self.network.alpha,
                "w_self": self.network.w_self,
                "w_lat": self.network.w_lat,
                "bias": self.network.bias,
            },
            "heuristics": self.heuristics.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> SolverConfig:
        doc = dict(doc)
        known = {"b0_schedule", "max_timesteps_per_b0", "stability_window", "seed",
                 "network", "heuristics"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown solver parameters: {sorted(unknown)}")
        if "network" in doc:
            doc["network"] = NetworkParams(**doc["network"])
        if "heuristics" in doc:
            doc["heuristics"] = HeuristicParams.from_dict(doc["heuristics"])
        return cls(**doc)


@dataclass
class StepRecord:
    timestep: int
    raw_score: float
    repaired_score: float


@dataclass
class B0Run:
    b0: float
    termination: str = "step-cap"  # or "stable"
    best_score: float = math.inf
    records: list[StepRecord] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.records)


@dataclass
class SolveTrace:
    runs: list[B0Run] = field(default_factory=list)

    @property
    def total_timesteps(self) -> int:
        return sum(r.steps for r in self.runs)


# ---------------------------------------------------------------------------


def decode(activation: np.ndarray) -> Allocation:
    """Read hypercolumn winners off a one-hot activation matrix."""
    a = np.asarray(activation)
    if a.ndim != 2 or a.shape[1] < 2:
        raise ValueError("activation must be an n_u x (n_s + 1) matrix")
    if not (np.all((a == 0) | (a == 1)) and np.all(a.sum(axis=1) == 1)):
        raise ValueError("activation rows must be one-hot")
    return Allocation.from_columns(a.argmax(axis=1), a.shape[1] - 1)


def encode(allocation: Allocation, n_s: int) -> np.ndarray:
    cols = allocation.to_columns(n_s)
    a = np.zeros((len(cols), n_s + 1))
    a[np.arange(len(cols)), cols] = 1.0
    return a


def repair_columns(instance: Instance, cols: np.ndarray, resource: int = 0) -> np.ndarray:
    """Evict users until every server fits; returns a new column vector.

    Users on servers that do not cover them are dropped first. Then, server
    by server, the largest user (by demand in ``resource``, lowest id on
    ties) is removed until the server's load fits both capacity components.
    """
    n_s = instance.n_s
    cols = np.array(cols, dtype=np.intp)
    assigned = cols < n_s
    if assigned.any():
        rows = np.nonzero(assigned)[0]
        bad = rows[~instance.coverage_matrix[rows, cols[rows]]]
        cols[bad] = n_s
    demands = instance.demands
    caps = instance.capacities + CAPACITY_EPS
    loads = server_loads(demands, cols, n_s)
    for j in np.nonzero(np.any(loads > caps, axis=1))[0]:
        members = [int(i) for i in np.nonzero(cols == j)[0]]
        # largest first, lowest id on ties
        members.sort(key=lambda i: (-demands[i, resource], i))
        load = loads[j].copy()
        for i in members:
            if np.all(load <= caps[j]):
                break
            cols[i] = n_s
            load -= demands[i]
    return cols


def repair(instance: Instance, allocation: Allocation, largeness: str = "core") -> Allocation:
    resource = largeness_resource(instance, largeness)
    cols = repair_columns(instance, allocation.to_columns(instance.n_s), resource)
    return Allocation.from_columns(cols, instance.n_s)


def columns_score(cols: np.ndarray, n_u: int, n_s: int) -> float:
    used = cols[cols < n_s]
    return score_value(used.size, np.unique(used).size, n_u, n_s)


def has_stabilized(activation_history: Sequence[np.ndarray], window: int) -> bool:
    """True iff the last ``window`` activations are identical."""
    if not activation_history:
        raise ValueError("activation history is empty")
    if len(activation_history) < window:
        return False
    recent = list(activation_history)[-window:]
    return all(np.array_equal(recent[0], a) for a in recent[1:])


def b0_rng(seed: int, b0_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b0_index,)))


def run_single_b0(instance: Instance, config: SolverConfig, b0: float, rng: np.random.Generator,
                  curve=None) -> tuple[Allocation, B0Run]:
    hp = replace(config.heuristics, b0=b0)
    gen = InputGenerator(instance, hp, curve if curve is not None else build_loadbias(hp))
    resource = gen.resource
    n_u, n_s = instance.n_u, instance.n_s

    state = init_network(n_u, n_s, config.network, rng)
    cols = state.winners
    history: deque[np.ndarray] = deque(maxlen=config.stability_window)
    history.append(cols)
    run = B0Run(b0)
    best_cols = np.full(n_u, n_s, dtype=np.intp)

    for _ in range(config.max_timesteps_per_b0):
        state = step(state, gen(cols), rng)
        cols = state.winners
        fixed = repair_columns(instance, cols, resource)
        raw_score = columns_score(cols, n_u, n_s)
        fixed_score = columns_score(fixed, n_u, n_s)
        run.records.append(StepRecord(state.timestep, raw_score, fixed_score))
        if fixed_score < run.best_score:
            run.best_score = fixed_score
            best_cols = fixed
        history.append(cols)
        if has_stabilized(history, config.stability_window):
            run.termination = "stable"
            break
    return Allocation.from_columns(best_cols, n_s), run


def solve(instance: Instance, config: SolverConfig) -> tuple[Allocation, EvalResult, SolveTrace]:
    """Run the b0 sweep and return the lowest-score feasible allocation found."""
    curve = build_loadbias(config.heuristics)
    trace = SolveTrace()
    best, best_score = Allocation.empty(instance.n_u), math.inf
    for k, b0 in enumerate(config.b0_schedule):
        alloc, run = run_single_b0(instance, config, b0, b0_rng(config.seed, k), curve)
        trace.runs.append(run)
        if run.best_score < best_score:
            best, best_score = alloc, run.best_score
    return best, evaluate_allocation(instance, best), trace


def chosen_b0(trace: SolveTrace) -> float | None:
    """b0 of the run that produced the returned allocation (first on ties)."""
    if not trace.runs:
        return None
    return min(trace.runs, key=lambda r: r.best_score).b0
