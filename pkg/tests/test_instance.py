import json

import numpy as np
import pytest
from hypothesis import given

from bcpnn_eua.instance import (
    Allocation,
    Instance,
    InstanceError,
    ResourceVector,
    Server,
    User,
    dc_ratio,
    evaluate_allocation,
    fill_degrees,
    instance_to_dict,
    largeness_resource,
    parse_instance,
    relative_capacities,
    relative_demands,
    render_instance,
    score_value,
)
from conftest import instances, make_instance


def doc(users, servers, kind="distributed", **extra):
    return json.dumps({"kind": kind, "users": users, "servers": servers, **extra})


# --- parsing -----------------------------------------------------------------

def test_parse_covered_user():
    inst = parse_instance(doc([{"id": 0, "x": 0, "y": 0, "core": 2, "ram": 4}],
                              [{"id": 0, "x": 0, "y": 0, "core": 8, "ram": 16, "radius": 10}]))
    assert inst.coverage == ((True,),)


def test_parse_out_of_range_user():
    inst = parse_instance(doc([{"id": 0, "x": 0, "y": 0, "core": 2, "ram": 4}],
                              [{"id": 0, "x": 100, "y": 0, "core": 8, "ram": 16, "radius": 10}]))
    assert inst.coverage == ((False,),)


def test_parse_centralized_without_radius():
    inst = parse_instance(doc([{"core": 1, "ram": 1}, {"core": 2, "ram": 1}],
                              [{"core": 8, "ram": 16}, {"core": 4, "ram": 4}], kind="centralized"))
    assert all(all(row) for row in inst.coverage)


@pytest.mark.parametrize("text", [
    "not json",
    json.dumps([]),
    doc([], [{"x": 0, "y": 0, "core": 1, "ram": 1, "radius": 1}]),
    doc([{"x": 0, "y": 0, "core": 1, "ram": 1}], []),
    doc([{"x": 0, "y": 0, "core": -1, "ram": 1}], [{"x": 0, "y": 0, "core": 1, "ram": 1, "radius": 1}]),
    doc([{"x": 0, "y": 0, "core": 1, "ram": 1}], [{"x": 0, "y": 0, "core": -1, "ram": 1, "radius": 1}]),
    doc([{"x": 0, "y": 0, "core": 1, "ram": 1}], [{"x": 0, "y": 0, "core": 1, "ram": 1}]),
    doc([{"x": 0, "y": 0, "core": "a", "ram": 1}], [{"x": 0, "y": 0, "core": 1, "ram": 1, "radius": 1}]),
    doc([{"x": 0, "y": 0, "core": 1, "ram": 1}], [{"x": 0, "y": 0, "core": 1, "ram": 1, "radius": 1}], kind="mixed"),
])
def test_parse_rejects_malformed(text):
    with pytest.raises(InstanceError):
        parse_instance(text)


def test_explicit_coverage_override_round_trips():
    text = doc([{"x": 0, "y": 0, "core": 1, "ram": 1}, {"x": 0, "y": 0, "core": 1, "ram": 1}],
               [{"x": 0, "y": 0, "core": 4, "ram": 4, "radius": 10}], coverage=[[1], [0]])
    inst = parse_instance(text)
    assert inst.coverage == ((True,), (False,))
    assert instance_to_dict(inst)["coverage"] == [[1], [0]]
    assert parse_instance(render_instance(inst)) == inst


@given(instances())
def test_render_parse_round_trip(inst):
    again = parse_instance(render_instance(inst))
    assert again == inst
    assert render_instance(again) == render_instance(inst)


# --- resource vectors ----------------------------------------------------------

def test_resource_vector_arithmetic():
    a, b = ResourceVector(3, 4), ResourceVector(1, 2)
    assert a + b == ResourceVector(4, 6)
    assert a - b == ResourceVector(2, 2)
    assert a / b == ResourceVector(3, 2)
    assert list(a) == [3, 4] and a[1] == 4
    with pytest.raises(ZeroDivisionError):
        a / ResourceVector(0, 1)


def test_user_and_server_validation():
    with pytest.raises(InstanceError):
        User(0, (0, 0), ResourceVector(0, 0))
    with pytest.raises(InstanceError):
        Server(0, (0, 0), ResourceVector(0, 1))
    with pytest.raises(InstanceError):
        Server(0, (0, 0), ResourceVector(1, 1), -1.0)


# --- static metrics ----------------------------------------------------------

@pytest.mark.parametrize("demands,caps,expected", [
    ([(4, 8), (6, 12)], [(10, 20), (10, 20)], (0.5, 0.5)),
    ([(4, 4)], [(4, 4)], (1.0, 1.0)),
    ([(10, 5), (20, 5)], [(5, 20), (15, 20)], (1.5, 0.25)),
])
def test_dc_ratio(demands, caps, expected):
    r = dc_ratio(make_instance(demands, caps))
    assert (r.core, r.ram) == pytest.approx(expected, abs=1e-12)


def test_relative_sizes_examples():
    same = make_instance([(2, 3)] * 4, [(5, 5)] * 3)
    assert all(tuple(v) == (0.0, 0.0) for v in relative_demands(same))
    assert all(tuple(v) == (0.0, 0.0) for v in relative_capacities(same))
    two = make_instance([(1, 1), (3, 1)], [(10, 5), (30, 5)])
    assert [v.core for v in relative_demands(two)] == pytest.approx([-0.5, 0.5])
    assert [v.core for v in relative_capacities(two)] == pytest.approx([-0.5, 0.5])


@given(instances())
def test_relative_sizes_sum_to_zero(inst):
    for vecs in (relative_demands(inst), relative_capacities(inst)):
        assert abs(sum(v.core for v in vecs)) < 1e-9
        assert abs(sum(v.ram for v in vecs)) < 1e-9


def test_fill_degree_examples():
    inst = make_instance([(4, 8)], [(8, 16)])
    assert [tuple(f) for f in fill_degrees(inst, Allocation.empty(1))] == [(0.0, 0.0)]
    assert tuple(fill_degrees(inst, Allocation((0,)))[0]) == (0.5, 0.5)
    over = make_instance([(3, 1), (2, 1)], [(4, 4)])
    assert tuple(fill_degrees(over, Allocation((0, 0)))[0]) == pytest.approx((1.25, 0.5))


def test_evaluate_examples():
    inst = make_instance([(1, 1)] * 10, [(100, 100)] * 4)
    ev = evaluate_allocation(inst, Allocation((0,) * 5 + (1,) * 5))
    assert ev.score == pytest.approx(-2.5) and ev.allocated_users == 10 and ev.servers_used == 2
    ev = evaluate_allocation(inst, Allocation.empty(10))
    assert (ev.allocated_users, ev.servers_used, ev.score, ev.feasible) == (0, 0, 0.0, True)
    tight = make_instance([(2, 2), (2, 2)], [(3, 3)])
    ev = evaluate_allocation(tight, Allocation((0, 0)))
    assert not ev.feasible and ev.allocated_users == 2 and ev.servers_used == 1


def test_evaluate_detects_coverage_violation():
    inst = make_instance([(1, 1)], [(4, 4)], kind="distributed", coverage=[[False]])
    assert not evaluate_allocation(inst, Allocation((0,))).feasible


def test_evaluate_rejects_bad_shape():
    inst = make_instance([(1, 1)], [(4, 4)])
    with pytest.raises(ValueError):
        evaluate_allocation(inst, Allocation((None, None)))
    with pytest.raises(ValueError):
        evaluate_allocation(inst, Allocation((3,)))


def test_largeness_modes():
    inst = make_instance([(1, 8)], [(10, 8)])
    assert largeness_resource(inst, "core") == 0
    assert largeness_resource(inst, "dc_ratio") == 1
    with pytest.raises(ValueError):
        largeness_resource(inst, "size")


def test_numpy_views_are_read_only():
    inst = make_instance([(1, 2)], [(3, 4)])
    assert np.array_equal(inst.demands, [[1, 2]])
    with pytest.raises(ValueError):
        inst.capacities[0, 0] = 9


def test_equal_scores_are_bitwise_equal():
    # 4 users on 2 of 3 servers ties 3 users on 1 server when n_u = 9
    assert score_value(4, 2, 9, 3) == score_value(3, 1, 9, 3) == -2 / 3
    for n_u in range(1, 16):
        for n_s in range(1, 6):
            seen = {}
            for a in range(n_u + 1):
                for u in range(min(a, n_s) + 1):
                    key = u * n_u - 3 * a * n_s
                    seen.setdefault(key, set()).add(score_value(a, u, n_u, n_s))
            assert all(len(v) == 1 for v in seen.values())
