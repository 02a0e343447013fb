import itertools
import os
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from bcpnn_eua.instance import Instance, ResourceVector, Server, User

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_instance(demands, capacities, kind="centralized", coverage=None, name="t"):
    users = tuple(User(i, (0.0, 0.0), ResourceVector(*map(float, d))) for i, d in enumerate(demands))
    servers = tuple(Server(j, (0.0, 0.0), ResourceVector(*map(float, c)),
                          0.0 if kind == "centralized" else 1.0) for j, c in enumerate(capacities))
    if kind == "distributed" and coverage is None:
        coverage = [[True] * len(capacities) for _ in demands]
    return Instance(users, servers, kind, coverage, name=name)


def brute_force(instance):
    """Best score over every one-state-per-user assignment, checking constraints directly."""
    n_u, n_s = instance.n_u, instance.n_s
    best, best_assign = 0.0, (None,) * n_u
    for assign in itertools.product(range(n_s + 1), repeat=n_u):
        load = [[0.0, 0.0] for _ in range(n_s)]
        ok = True
        for i, j in enumerate(assign):
            if j == n_s:
                continue
            if not instance.coverage[i][j]:
                ok = False
                break
            load[j][0] += instance.users[i].demand.core
            load[j][1] += instance.users[i].demand.ram
        if not ok:
            continue
        if any(load[j][0] > instance.servers[j].capacity.core + 1e-9
               or load[j][1] > instance.servers[j].capacity.ram + 1e-9 for j in range(n_s)):
            continue
        a_u = sum(j != n_s for j in assign)
        u_s = len({j for j in assign if j != n_s})
        s = float(Fraction(u_s, n_s) - Fraction(3 * a_u, n_u))
        if s < best:
            best, best_assign = s, tuple(None if j == n_s else j for j in assign)
    return best, best_assign


@st.composite
def instances(draw, max_users=6, max_servers=3, kinds=("centralized", "distributed")):
    n_u = draw(st.integers(1, max_users))
    n_s = draw(st.integers(1, max_servers))
    kind = draw(st.sampled_from(kinds))
    dem = draw(st.lists(st.tuples(st.integers(1, 8), st.integers(1, 8)), min_size=n_u, max_size=n_u))
    cap = draw(st.lists(st.tuples(st.integers(1, 24), st.integers(1, 24)), min_size=n_s, max_size=n_s))
    cov = None
    if kind == "distributed":
        cov = draw(st.lists(st.lists(st.booleans(), min_size=n_s, max_size=n_s), min_size=n_u, max_size=n_u))
    return make_instance(dem, cap, kind, cov)


@pytest.fixture(scope="session")
def pinned_suite(tmp_path_factory):
    from bcpnn_eua.harness import default_suite_doc, generate_case_set, load_manifest

    out = tmp_path_factory.mktemp("suite")
    generate_case_set(default_suite_doc(), out)
    return load_manifest(out / "manifest.json")[1]


def brute_force_scores(instance):
    """Vectorised exhaustive search: best score over all (n_s+1)^n_u states, no pruning."""
    n_u, n_s = instance.n_u, instance.n_s
    grid = np.indices((n_s + 1,) * n_u, dtype=np.int8).reshape(n_u, -1).T
    d = instance.demands
    ok = np.ones(len(grid), dtype=bool)
    cov = np.hstack([instance.coverage_matrix, np.ones((n_u, 1), dtype=bool)])
    for i in range(n_u):
        ok &= cov[i, grid[:, i]]
    used = np.zeros(len(grid), dtype=np.int64)
    for j in range(n_s):
        on = grid == j
        load = on.astype(float) @ d
        ok &= np.all(load <= instance.capacities[j] + 1e-9, axis=1)
        used += on.any(axis=1)
    allocated = (grid < n_s).sum(axis=1)
    scores = (used * n_u - 3 * allocated * n_s) / (n_u * n_s)
    return float(scores[ok].min())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
