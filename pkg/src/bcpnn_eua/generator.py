"""Synthetic EUA instance generation with a controlled demand-capacity ratio."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .instance import Instance, InstanceError, ResourceVector, Server, User, dc_ratio

DC_TOLERANCE = 0.05


@dataclass(frozen=True)
class GeneratorConfig:
    n_u: int
    n_s: int
    kind: str = "distributed"
    r_target: tuple[float, float] = (0.8, 0.8)
    demand_core: tuple[int, int] = (1, 8)
    demand_ram: tuple[int, int] = (1, 8)
    # pre-scaling capacity draw; only the spread between servers survives rescaling
    capacity_core: tuple[float, float] = (8.0, 24.0)
    capacity_ram: tuple[float, float] = (8.0, 24.0)
    radius: tuple[float, float] = (10.0, 25.0)
    area: float = 100.0
    max_retries: int = 1000
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n_u < 1 or self.n_s < 1:
            raise InstanceError("generator needs n_u >= 1 and n_s >= 1")
        if min(self.r_target) <= 0:
            raise InstanceError("r_target components must be positive")
        for key in ("demand_core", "demand_ram", "capacity_core", "capacity_ram", "radius"):
            lo, hi = getattr(self, key)
            if lo > hi or lo < 0:
                raise InstanceError(f"bad range for {key}: {(lo, hi)}")
        if self.demand_core[1] < 1 and self.demand_ram[1] < 1:
            raise InstanceError("demand ranges cannot produce a positive demand")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, doc: dict) -> GeneratorConfig:
        known = cls.__dataclass_fields__
        unknown = set(doc) - set(known)
        if unknown:
            raise InstanceError(f"unknown generator fields: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
        return cls(**kw)


def _sample_demands(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    d = np.empty((cfg.n_u, 2))
    d[:, 0] = rng.integers(cfg.demand_core[0], cfg.demand_core[1] + 1, size=cfg.n_u)
    d[:, 1] = rng.integers(cfg.demand_ram[0], cfg.demand_ram[1] + 1, size=cfg.n_u)
    # a user must demand something
    zero = d.sum(axis=1) == 0
    d[zero, 0] = max(1, cfg.demand_core[0])
    return d


def _sample_capacities(cfg: GeneratorConfig, demands: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    c = np.empty((cfg.n_s, 2))
    c[:, 0] = rng.uniform(*cfg.capacity_core, size=cfg.n_s)
    c[:, 1] = rng.uniform(*cfg.capacity_ram, size=cfg.n_s)
    c = np.maximum(c, 1e-6)
    target_total = demands.sum(axis=0) / np.asarray(cfg.r_target, dtype=float)
    c *= target_total / c.sum(axis=0)
    return np.maximum(np.round(c, 2), 0.01)


def generate_instance(cfg: GeneratorConfig, seed: int) -> Instance:
    """Draw an instance; deterministic for a fixed ``(cfg, seed)``.

    Capacities are rescaled after sampling so that the realised DC ratio
    hits ``cfg.r_target``. For distributed instances every user is placed
    inside at least one server's coverage disc (positions are redrawn, up to
    ``cfg.max_retries`` times per user).
    """
    rng = np.random.default_rng(seed)
    demands = _sample_demands(cfg, rng)
    caps = _sample_capacities(cfg, demands, rng)

    if cfg.kind == "centralized":
        server_pos = np.zeros((cfg.n_s, 2))
        user_pos = np.zeros((cfg.n_u, 2))
        radii = np.zeros(cfg.n_s)
    elif cfg.kind == "distributed":
        server_pos = np.round(rng.uniform(0, cfg.area, size=(cfg.n_s, 2)), 2)
        radii = np.round(rng.uniform(*cfg.radius, size=cfg.n_s), 2)
        user_pos = np.empty((cfg.n_u, 2))
        for i in range(cfg.n_u):
            for _ in range(cfg.max_retries):
                p = np.round(rng.uniform(0, cfg.area, size=2), 2)
                if any(math.dist(p, server_pos[j]) <= radii[j] for j in range(cfg.n_s)):
                    user_pos[i] = p
                    break
            else:
                raise InstanceError(
                    f"could not place user {i} inside any coverage disc "
                    f"after {cfg.max_retries} draws; widen the radius range"
                )
    else:
        raise InstanceError(f"unknown instance kind {cfg.kind!r}")

    users = tuple(
        User(i, (float(user_pos[i, 0]), float(user_pos[i, 1])),
             ResourceVector(float(demands[i, 0]), float(demands[i, 1])))
        for i in range(cfg.n_u)
    )
    servers = tuple(
        Server(j, (float(server_pos[j, 0]), float(server_pos[j, 1])),
               ResourceVector(float(caps[j, 0]), float(caps[j, 1])), float(radii[j]))
        for j in range(cfg.n_s)
    )
    inst = Instance(users, servers, cfg.kind, name=cfg.name)
    r = dc_ratio(inst)
    for got, want in zip(r, cfg.r_target):
        if abs(got - want) > DC_TOLERANCE * want:
            raise InstanceError(f"realised DC ratio {r} misses target {cfg.r_target}")
    return inst
