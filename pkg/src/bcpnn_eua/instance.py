"""Edge User Allocation problem data: instances, allocations, I/O and static metrics.

Server indices are 0-based throughout the Python API; ``None`` marks a user
left unallocated. Resource vectors are ``(core, ram)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

RESOURCES = ("core", "ram")
KINDS = ("distributed", "centralized")
INSTANCE_FORMAT = "eua-instance/1"
# slack for float round-off in capacity checks
CAPACITY_EPS = 1e-9


class InstanceError(ValueError):
    """Raised for malformed instance documents or invalid problem data."""


@dataclass(frozen=True)
class ResourceVector:
    core: float
    ram: float

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(self.core + other.core, self.ram + other.ram)

    def __sub__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(self.core - other.core, self.ram - other.ram)

    def __truediv__(self, other: ResourceVector) -> ResourceVector:
        if other.core == 0 or other.ram == 0:
            raise ZeroDivisionError(f"component-wise division by {other}")
        return ResourceVector(self.core / other.core, self.ram / other.ram)

    def __iter__(self):
        yield self.core
        yield self.ram

    def __getitem__(self, idx: int) -> float:
        return (self.core, self.ram)[idx]

    def is_nonnegative(self) -> bool:
        return self.core >= 0 and self.ram >= 0


@dataclass(frozen=True)
class User:
    id: int
    position: tuple[float, float]
    demand: ResourceVector

    def __post_init__(self):
        if not self.demand.is_nonnegative():
            raise InstanceError(f"user {self.id}: negative demand {self.demand}")
        if self.demand.core <= 0 and self.demand.ram <= 0:
            raise InstanceError(f"user {self.id}: demand must have a positive component")


@dataclass(frozen=True)
class Server:
    id: int
    position: tuple[float, float]
    capacity: ResourceVector
    coverage_radius: float = 0.0

    def __post_init__(self):
        if not self.capacity.is_nonnegative():
            raise InstanceError(f"server {self.id}: negative capacity {self.capacity}")
        if self.capacity.core <= 0 or self.capacity.ram <= 0:
            raise InstanceError(f"server {self.id}: capacity components must be positive")
        if self.coverage_radius < 0:
            raise InstanceError(f"server {self.id}: negative coverage radius")


def distance_coverage(users: Sequence[User], servers: Sequence[Server]) -> tuple[tuple[bool, ...], ...]:
    return tuple(
        tuple(
            math.dist(u.position, s.position) <= s.coverage_radius for s in servers
        )
        for u in users
    )


@dataclass(frozen=True)
class Instance:
    """A static EUA snapshot.

    ``coverage`` defaults to the distance rule for distributed instances and
    to all-true for centralized ones. An explicit coverage matrix may be
    passed to override the distance rule (datasets sometimes ship the
    covered-user sets directly).
    """

    users: tuple[User, ...]
    servers: tuple[Server, ...]
    kind: str = "distributed"
    coverage: tuple[tuple[bool, ...], ...] | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InstanceError(f"unknown instance kind {self.kind!r}")
        if not self.users or not self.servers:
            raise InstanceError("an instance needs at least one user and one server")
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "servers", tuple(self.servers))
        if self.coverage is None:
            if self.kind == "centralized":
                cov = tuple((True,) * self.n_s for _ in range(self.n_u))
            else:
                cov = distance_coverage(self.users, self.servers)
        else:
            cov = tuple(tuple(bool(c) for c in row) for row in self.coverage)
            if len(cov) != self.n_u or any(len(row) != self.n_s for row in cov):
                raise InstanceError("coverage matrix shape does not match users x servers")
            if self.kind == "centralized" and not all(all(row) for row in cov):
                raise InstanceError("centralized instances must have all-true coverage")
        object.__setattr__(self, "coverage", cov)

    @property
    def n_u(self) -> int:
        return len(self.users)

    @property
    def n_s(self) -> int:
        return len(self.servers)

    # numpy views, computed once; callers must not mutate them
    @cached_property
    def demands(self) -> np.ndarray:
        arr = np.array([[u.demand.core, u.demand.ram] for u in self.users], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def capacities(self) -> np.ndarray:
        arr = np.array([[s.capacity.core, s.capacity.ram] for s in self.servers], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def coverage_matrix(self) -> np.ndarray:
        arr = np.array(self.coverage, dtype=bool).reshape(self.n_u, self.n_s)
        arr.setflags(write=False)
        return arr

    def has_explicit_coverage(self) -> bool:
        if self.kind == "centralized":
            return False
        return self.coverage != distance_coverage(self.users, self.servers)


@dataclass(frozen=True)
class Allocation:
    """One state per user: a server index or ``None`` (not allocated)."""

    assignment: tuple[int | None, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(self.assignment))

    def __len__(self) -> int:
        return len(self.assignment)

    @classmethod
    def empty(cls, n_u: int) -> Allocation:
        return cls((None,) * n_u)

    @classmethod
    def from_columns(cls, cols: Iterable[int], n_s: int) -> Allocation:
        """Build from hypercolumn winners, where column ``n_s`` is the no-allocation unit."""
        return cls(tuple(None if c == n_s else int(c) for c in cols))

    def to_columns(self, n_s: int) -> np.ndarray:
        return np.array([n_s if a is None else a for a in self.assignment], dtype=np.intp)


@dataclass(frozen=True)
class EvalResult:
    allocated_users: int
    servers_used: int
    feasible: bool
    score: float


def score_value(allocated_users: int, servers_used: int, n_u: int, n_s: int) -> float:
    # one integer division, so allocations with equal rational scores get equal floats
    return (servers_used * n_u - 3 * allocated_users * n_s) / (n_u * n_s)


# ---------------------------------------------------------------------------
# static metrics


def _check_shape(instance: Instance, allocation: Allocation) -> None:
    if len(allocation) != instance.n_u:
        raise ValueError(
            f"allocation has {len(allocation)} entries, instance has {instance.n_u} users"
        )
    for a in allocation.assignment:
        if a is not None and not 0 <= a < instance.n_s:
            raise ValueError(f"server index {a} out of range for {instance.n_s} servers")


def server_loads(demands: np.ndarray, cols: np.ndarray, n_s: int) -> np.ndarray:
    """Summed demand per server (n_s x 2) for hypercolumn winners ``cols``."""
    loads = np.empty((n_s, demands.shape[1]))
    for r in range(demands.shape[1]):
        loads[:, r] = np.bincount(cols, weights=demands[:, r], minlength=n_s + 1)[:n_s]
    return loads


def dc_ratio(instance: Instance) -> ResourceVector:
    total_cap = instance.capacities.sum(axis=0)
    if np.any(total_cap <= 0):
        raise ZeroDivisionError("total server capacity is zero in some component")
    r = instance.demands.sum(axis=0) / total_cap
    return ResourceVector(float(r[0]), float(r[1]))


def _relative_sizes(values: np.ndarray) -> np.ndarray:
    totals = values.sum(axis=0)
    if np.any(totals <= 0):
        raise ZeroDivisionError("total size is zero in some component")
    return len(values) * values / totals - 1.0


def relative_demands_array(instance: Instance) -> np.ndarray:
    return _relative_sizes(instance.demands)


def relative_capacities_array(instance: Instance) -> np.ndarray:
    return _relative_sizes(instance.capacities)


def relative_demands(instance: Instance) -> list[ResourceVector]:
    return [ResourceVector(float(a), float(b)) for a, b in relative_demands_array(instance)]


def relative_capacities(instance: Instance) -> list[ResourceVector]:
    return [ResourceVector(float(a), float(b)) for a, b in relative_capacities_array(instance)]


def largeness_resource(instance: Instance, mode: str = "core") -> int:
    """Index of the resource used to rank users and servers by size.

    ``"core"`` always uses the CPU-core count; ``"dc_ratio"`` picks the
    resource with the highest demand-capacity ratio (first one on ties).
    """
    if mode == "core":
        return 0
    if mode == "dc_ratio":
        r = dc_ratio(instance)
        return 0 if r.core >= r.ram else 1
    raise ValueError(f"unknown largeness mode {mode!r}")


def fill_degrees(instance: Instance, allocation: Allocation) -> list[ResourceVector]:
    _check_shape(instance, allocation)
    loads = server_loads(instance.demands, allocation.to_columns(instance.n_s), instance.n_s)
    f = loads / instance.capacities
    return [ResourceVector(float(a), float(b)) for a, b in f]


def evaluate_allocation(instance: Instance, allocation: Allocation) -> EvalResult:
    """Count allocated users and used servers, check constraints and score.

    The score is computed whether or not the allocation is feasible.
    """
    _check_shape(instance, allocation)
    cols = allocation.to_columns(instance.n_s)
    assigned = cols < instance.n_s
    a_u = int(assigned.sum())
    u_s = len(set(cols[assigned].tolist()))
    covered = all(
        instance.coverage[i][j] for i, j in enumerate(allocation.assignment) if j is not None
    )
    loads = server_loads(instance.demands, cols, instance.n_s)
    fits = bool(np.all(loads <= instance.capacities + CAPACITY_EPS))
    return EvalResult(a_u, u_s, covered and fits, score_value(a_u, u_s, instance.n_u, instance.n_s))


# ---------------------------------------------------------------------------
# instance documents


def instance_to_dict(instance: Instance) -> dict:
    doc: dict = {"format": INSTANCE_FORMAT, "name": instance.name, "kind": instance.kind}
    centralized = instance.kind == "centralized"
    doc["users"] = [
        {"id": u.id, "x": u.position[0], "y": u.position[1],
         "core": u.demand.core, "ram": u.demand.ram}
        for u in instance.users
    ]
    servers = []
    for s in instance.servers:
        entry = {"id": s.id, "x": s.position[0], "y": s.position[1],
                 "core": s.capacity.core, "ram": s.capacity.ram}
        if not centralized:
            entry["radius"] = s.coverage_radius
        servers.append(entry)
    doc["servers"] = servers
    if instance.has_explicit_coverage():
        doc["coverage"] = [[int(c) for c in row] for row in instance.coverage]
    return doc


def render_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def _number(entry: dict, key: str, where: str, default=None) -> float:
    if key not in entry:
        if default is not None:
            return default
        raise InstanceError(f"{where}: missing field {key!r}")
    value = entry[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceError(f"{where}: field {key!r} must be a number, got {value!r}")
    return value


def instance_from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceError("instance document must be a mapping")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise InstanceError(f"instance kind must be one of {KINDS}, got {kind!r}")
    raw_users = doc.get("users")
    raw_servers = doc.get("servers")
    if not isinstance(raw_users, list) or not isinstance(raw_servers, list):
        raise InstanceError("instance document needs 'users' and 'servers' lists")
    if not raw_users or not raw_servers:
        raise InstanceError("instance document has no users or no servers")
    centralized = kind == "centralized"
    users = []
    for k, e in enumerate(raw_users):
        where = f"user #{k}"
        if not isinstance(e, dict):
            raise InstanceError(f"{where}: expected a mapping")
        users.append(User(
            id=int(e.get("id", k)),
            position=(_number(e, "x", where, 0.0 if centralized else None),
                      _number(e, "y", where, 0.0 if centralized else None)),
            demand=ResourceVector(_number(e, "core", where), _number(e, "ram", where)),
        ))
    servers = []
    for k, e in enumerate(raw_servers):
        where = f"server #{k}"
        if not isinstance(e, dict):
            raise InstanceError(f"{where}: expected a mapping")
        servers.append(Server(
            id=int(e.get("id", k)),
            position=(_number(e, "x", where, 0.0 if centralized else None),
                      _number(e, "y", where, 0.0 if centralized else None)),
            capacity=ResourceVector(_number(e, "core", where), _number(e, "ram", where)),
            coverage_radius=0.0 if centralized else _number(e, "radius", where),
        ))
    coverage = doc.get("coverage")
    if coverage is not None:
        if not isinstance(coverage, list) or not all(isinstance(r, list) for r in coverage):
            raise InstanceError("'coverage' must be a list of 0/1 rows")
    return Instance(tuple(users), tuple(servers), kind, coverage, name=str(doc.get("name", "")))


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed instance document: {exc}") from exc
    return instance_from_dict(doc)


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())
