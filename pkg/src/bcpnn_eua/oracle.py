"""Reference solvers: exact branch-and-bound and a greedy packing baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import CAPACITY_EPS, Allocation, Instance, largeness_resource, score_value

DEFAULT_NODE_BUDGET = 10**7


@dataclass(frozen=True)
class OracleResult:
    allocation: Allocation
    score: float
    optimal: bool
    nodes_explored: int


class BudgetExhausted(RuntimeError):
    """The exact search hit its node budget; ``incumbent`` is the best found so far."""

    def __init__(self, incumbent: OracleResult):
        super().__init__(
            f"node budget exhausted after {incumbent.nodes_explored} nodes "
            f"(incumbent score {incumbent.score:.6f})"
        )
        self.incumbent = incumbent


def exact_solve(instance: Instance, node_budget: int = DEFAULT_NODE_BUDGET) -> OracleResult:
    """Minimise the score exactly by depth-first branch-and-bound.

    Users are branched in decreasing order of total demand; each user tries
    the servers already in use, then unused covered servers, then no
    allocation. A partial assignment is pruned when even allocating every
    remaining user that still fits somewhere, without opening more servers
    than strictly needed, cannot beat the incumbent.
    """
    n_u, n_s = instance.n_u, instance.n_s
    d = instance.demands.tolist()
    cap = (instance.capacities + CAPACITY_EPS).tolist()
    cov = instance.coverage
    user_gain = 3.0 / n_u
    server_cost = 1.0 / n_s
    order = sorted(range(n_u), key=lambda i: (-(d[i][0] + d[i][1]), i))
    options = [[j for j in range(n_s) if cov[i][j]] for i in order]

    # seed the incumbent with the greedy packing
    seed = greedy_solve(instance)
    best_score = seed.score
    best_cols = list(seed.allocation.assignment)
    remaining = [[c[0], c[1]] for c in cap]
    count = [0] * n_s
    current: list[int | None] = [None] * n_u
    nodes = 0
    exhausted = False

    def fits(i: int, j: int) -> bool:
        r = remaining[j]
        return d[i][0] <= r[0] and d[i][1] <= r[1]

    def bound(depth: int, allocated: int, used: int) -> float:
        extra_users = 0
        needs_new = False
        for k in range(depth, n_u):
            i = order[k]
            open_fit = False
            any_fit = False
            for j in options[k]:
                if fits(i, j):
                    any_fit = True
                    if count[j]:
                        open_fit = True
                        break
            if any_fit:
                extra_users += 1
                if not open_fit:
                    needs_new = True
        lb = score_value(allocated + extra_users, used, n_u, n_s)
        if needs_new:
            lb += min(server_cost, user_gain)
        return lb

    def dfs(depth: int, allocated: int, used: int) -> None:
        nonlocal best_score, best_cols, nodes, exhausted
        if exhausted:
            return
        nodes += 1
        if nodes > node_budget:
            exhausted = True
            return
        if depth == n_u:
            s = score_value(allocated, used, n_u, n_s)
            if s < best_score - 1e-12:
                best_score = s
                best_cols = list(current)
            return
        if bound(depth, allocated, used) >= best_score - 1e-12:
            return
        i = order[depth]
        opts = options[depth]
        for j in sorted(opts, key=lambda j: (count[j] == 0, j)):
            if not fits(i, j):
                continue
            r = remaining[j]
            r[0] -= d[i][0]
            r[1] -= d[i][1]
            count[j] += 1
            current[i] = j
            dfs(depth + 1, allocated + 1, used + (count[j] == 1))
            current[i] = None
            count[j] -= 1
            r[0] += d[i][0]
            r[1] += d[i][1]
        dfs(depth + 1, allocated, used)

    dfs(0, 0, 0)
    result = OracleResult(Allocation(tuple(best_cols)), best_score, not exhausted, nodes)
    if exhausted:
        raise BudgetExhausted(result)
    return result


def greedy_solve(instance: Instance, largeness: str = "core") -> OracleResult:
    """Smallest users first, each onto the fullest open server that fits.

    A new server (largest capacity first) is opened only when no open
    server can take the user; users that fit nowhere stay unallocated.
    """
    res = largeness_resource(instance, largeness)
    n_u, n_s = instance.n_u, instance.n_s
    d = instance.demands
    caps = instance.capacities
    load = np.zeros_like(caps)
    is_open = np.zeros(n_s, dtype=bool)
    assignment: list[int | None] = [None] * n_u

    def fits(i: int, j: int) -> bool:
        return bool(np.all(load[j] + d[i] <= caps[j] + CAPACITY_EPS))

    for i in sorted(range(n_u), key=lambda i: (d[i, res], i)):
        covered = [j for j in range(n_s) if instance.coverage[i][j]]
        open_fit = [j for j in covered if is_open[j] and fits(i, j)]
        if open_fit:
            fill = (load / caps).max(axis=1)
            j = max(open_fit, key=lambda j: (fill[j], -j))
        else:
            closed_fit = [j for j in covered if not is_open[j] and fits(i, j)]
            if not closed_fit:
                continue
            j = max(closed_fit, key=lambda j: (caps[j, res], -j))
            is_open[j] = True
        load[j] += d[i]
        assignment[i] = j

    a_u = sum(a is not None for a in assignment)
    u_s = int(is_open.sum())
    return OracleResult(Allocation(tuple(assignment)), score_value(a_u, u_s, n_u, n_s), False, n_u)


def performance_gap(model_score: float, reference_score: float) -> float | None:
    """Percentage by which ``model_score`` exceeds the reference; ``None`` when undefined."""
    if abs(reference_score) < 1e-9:
        return None
    return 100.0 * (model_score - reference_score) / abs(reference_score)
