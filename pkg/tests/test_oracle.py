import numpy as np
import pytest
from hypothesis import given

from bcpnn_eua.generator import GeneratorConfig, generate_instance
from bcpnn_eua.instance import Allocation, evaluate_allocation
from bcpnn_eua.oracle import BudgetExhausted, exact_solve, greedy_solve, performance_gap
from conftest import brute_force, instances, make_instance


def test_two_users_one_server():
    inst = make_instance([(2, 2), (2, 2)], [(8, 8)])
    res = exact_solve(inst)
    assert res.allocation.assignment == (0, 0)
    assert res.score == pytest.approx(-2.0) and res.optimal


def test_uncovered_user():
    inst = make_instance([(1, 1)], [(8, 8)], kind="distributed", coverage=[[False]])
    res = exact_solve(inst)
    assert res.allocation.assignment == (None,) and res.score == 0.0


def test_random_six_by_three_matches_enumeration():
    inst = generate_instance(GeneratorConfig(6, 3, "distributed", (1.1, 0.9)), 42)
    best, _ = brute_force(inst)
    assert exact_solve(inst).score == best


@given(instances(max_users=6, max_servers=3))
def test_exact_matches_enumeration(inst):
    best, _ = brute_force(inst)
    res = exact_solve(inst)
    assert res.score == best
    ev = evaluate_allocation(inst, res.allocation)
    assert ev.feasible and ev.score == res.score


def test_budget_exhaustion_carries_incumbent():
    inst = generate_instance(GeneratorConfig(12, 5, "centralized", (1.2, 1.2)), 1)
    with pytest.raises(BudgetExhausted) as exc:
        exact_solve(inst, node_budget=10)
    inc = exc.value.incumbent
    assert not inc.optimal
    assert evaluate_allocation(inst, inc.allocation).feasible


def test_greedy_ample_server():
    inst = make_instance([(1, 2), (2, 1), (3, 3)], [(100, 100)])
    res = greedy_solve(inst)
    assert res.allocation.assignment == (0, 0, 0) and not res.optimal


@given(instances())
def test_greedy_feasible_and_bounded(inst):
    res = greedy_solve(inst)
    ev = evaluate_allocation(inst, res.allocation)
    assert ev.feasible and ev.score == pytest.approx(res.score)
    assert exact_solve(inst).score <= res.score + 1e-12


def test_greedy_prefers_fullest_open_server():
    # the small users fill server 0 (largest first); the next user must go there too
    inst = make_instance([(1, 1), (1, 1), (2, 2)], [(10, 10), (4, 4)])
    assert greedy_solve(inst).allocation.assignment == (0, 0, 0)


def test_performance_gap_examples():
    assert performance_gap(-2.25, -2.5) == pytest.approx(10.0)
    assert performance_gap(-1.0, -1.0) == 0.0
    assert performance_gap(-1.0, 0.0) is None
