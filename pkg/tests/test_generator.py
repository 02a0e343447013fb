import pytest
from hypothesis import given, strategies as st

from bcpnn_eua.generator import GeneratorConfig, generate_instance
from bcpnn_eua.instance import InstanceError, dc_ratio, render_instance


def test_realised_ratio_near_target():
    inst = generate_instance(GeneratorConfig(10, 3, "centralized", (0.8, 0.8)), 7)
    r = dc_ratio(inst)
    assert 0.76 <= r.core <= 0.84 and 0.76 <= r.ram <= 0.84


def test_same_seed_same_instance():
    cfg = GeneratorConfig(10, 3, "centralized", (0.8, 0.8))
    assert render_instance(generate_instance(cfg, 7)) == render_instance(generate_instance(cfg, 7))


def test_single_user_covered():
    inst = generate_instance(GeneratorConfig(1, 1, "distributed"), 0)
    assert inst.coverage == ((True,),)


@given(st.integers(1, 15), st.integers(1, 5), st.sampled_from(["distributed", "centralized"]),
       st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.integers(0, 2**32 - 1))
def test_generator_contract(n_u, n_s, kind, rc, rr, seed):
    inst = generate_instance(GeneratorConfig(n_u, n_s, kind, (rc, rr)), seed)
    r = dc_ratio(inst)
    assert abs(r.core - rc) <= 0.05 * rc and abs(r.ram - rr) <= 0.05 * rr
    assert (inst.n_u, inst.n_s, inst.kind) == (n_u, n_s, kind)
    assert all(any(row) for row in inst.coverage)


def test_impossible_placement_is_reported():
    cfg = GeneratorConfig(3, 1, "distributed", radius=(0.0, 0.0), max_retries=5)
    with pytest.raises(InstanceError):
        generate_instance(cfg, 1)


def test_config_round_trip():
    cfg = GeneratorConfig(4, 2, "centralized", (1.2, 0.7), name="x")
    assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(InstanceError):
        GeneratorConfig.from_dict({"n_u": 1, "n_s": 1, "bogus": 1})
