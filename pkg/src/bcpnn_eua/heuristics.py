"""Dynamic heuristic generator: the external input of every unit, every timestep.

Three unit types get different inputs:

* uncovered allocation units are muted with ``2 * y_min``;
* covered allocation units combine the server's loadbias value, the user's
  and server's relative sizes and the cosine similarity between the user's
  demand and the server's remaining space;
* no-allocation units get a static threshold driven by resource scarcity,
  the user's relative size and the baseline ``b0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .instance import (
    Allocation,
    Instance,
    dc_ratio,
    largeness_resource,
    relative_capacities_array,
    relative_demands_array,
    server_loads,
)


class LoadbiasConfigError(ValueError):
    """The loadbias parameters do not produce the required curve shape."""


@dataclass(frozen=True)
class HeuristicParams:
    y1: float = -6.0
    y_min: float = -130.0
    f0: float = 0.9
    k_e: float = 2.4
    k: float = -41.6
    k0: float = 18.0
    k1: float = 10.0
    k2: float = 20.0
    k3: float = 30.0
    b0: float = -180.0
    largeness: str = "dc_ratio"

    def __post_init__(self):
        if self.y_min >= 0:
            raise ValueError(f"y_min must be negative, got {self.y_min}")
        if not 0 < self.f0 <= 1:
            raise ValueError(f"f0 must lie in (0, 1], got {self.f0}")
        if min(self.k1, self.k2, self.k3) < 0:
            raise ValueError("component weights k1, k2, k3 must be non-negative")
        if self.largeness not in ("core", "dc_ratio"):
            raise ValueError(f"unknown largeness mode {self.largeness!r}")

    @property
    def b3(self) -> float:
        """Shift that centres the cosine term, whose range is [0, 1]."""
        return self.k3 / 2.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> HeuristicParams:
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown heuristic parameters: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class LoadbiasCurve:
    """Reward for a server's fill degree.

    The exponential branch is

        y_exp(f) = y1 + |y1|/f0 * f - |y1|/(f0*k_e) * exp(-k_e*f0) * (exp(k_e*f) - 1)

    which equals ``y1`` at zero usage, rises with slope ``|y1|/f0``, peaks
    exactly at ``f0`` and then falls off exponentially. Past the crossover
    ``f_c`` where it reaches ``y_min`` the curve continues linearly with
    slope ``k``.
    """

    params: HeuristicParams
    f_c: float

    def y_exp(self, f):
        p = self.params
        amp = abs(p.y1) / p.f0
        return p.y1 + amp * f - amp / p.k_e * np.exp(-p.k_e * p.f0) * np.expm1(p.k_e * f)

    def y_lin(self, f):
        p = self.params
        return p.y_min + p.k * (f - self.f_c)

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        out = np.where(f <= self.f_c, self.y_exp(np.minimum(f, self.f_c)), self.y_lin(f))
        return float(out) if out.ndim == 0 else out


def _y_exp_scalar(p: HeuristicParams, f: float) -> float:
    amp = abs(p.y1) / p.f0
    try:
        tail = amp / p.k_e * math.exp(-p.k_e * p.f0) * math.expm1(p.k_e * f)
    except OverflowError:
        return -math.inf
    return p.y1 + amp * f - tail


def build_loadbias(params: HeuristicParams) -> LoadbiasCurve:
    """Locate the crossover fill degree by bisection and return the curve."""
    if params.k_e <= 0:
        raise LoadbiasConfigError("k_e must be positive: the curve needs an exponential fall-off past f0")
    if params.y1 == 0:
        raise LoadbiasConfigError("y1 = 0 gives a flat curve with no peak at f0")
    if params.y1 <= params.y_min:
        raise LoadbiasConfigError("curve(0) = y1 must lie above y_min for a single crossover past f0")
    if params.k >= 0:
        raise LoadbiasConfigError("k must be negative: the curve must keep decreasing past f_c")

    lo = params.f0
    if _y_exp_scalar(params, lo) <= params.y_min:
        raise LoadbiasConfigError("the peak at f0 does not lie above y_min")
    hi = lo + 0.5
    while _y_exp_scalar(params, hi) > params.y_min:
        hi = lo + 2 * (hi - lo)
        if hi - lo > 1e3:
            raise LoadbiasConfigError("no crossover with y_min within 1000 units of f0")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _y_exp_scalar(params, mid) > params.y_min:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    f_c = 0.5 * (lo + hi)
    if abs(_y_exp_scalar(params, f_c) - params.y_min) > 1e-9:
        raise LoadbiasConfigError("bisection did not converge on the y_min crossover")
    return LoadbiasCurve(params, f_c)


def loadbias(curve: LoadbiasCurve, f_pair) -> float:
    """Curve value at the fuller of the two resources."""
    return curve(max(f_pair))


def uncovered_input(params: HeuristicParams) -> float:
    return 2.0 * params.y_min


# ---------------------------------------------------------------------------
# array kernels


def cosine_matrix(demands: np.ndarray, remaining: np.ndarray) -> np.ndarray:
    """Cosine between each demand row and each (clamped) remaining-space row."""
    rem = np.maximum(remaining, 0.0)
    rem_norm = np.linalg.norm(rem, axis=1)
    d_norm = np.linalg.norm(demands, axis=1)
    dots = demands @ rem.T
    denom = d_norm[:, None] * rem_norm[None, :]
    theta = np.zeros_like(dots)
    np.divide(dots, denom, out=theta, where=denom > 0)
    return np.clip(theta, 0.0, 1.0)


class InputGenerator:
    """Per-instance precomputation of the static input terms.

    Calling the generator with the current hypercolumn winners returns the
    full ``n_u x (n_s + 1)`` external input matrix.
    """

    def __init__(self, instance: Instance, params: HeuristicParams, curve: LoadbiasCurve | None = None):
        self.instance = instance
        self.params = params
        self.curve = curve if curve is not None else build_loadbias(params)
        self.resource = largeness_resource(instance, params.largeness)
        rel_d = relative_demands_array(instance)[:, self.resource]
        rel_c = relative_capacities_array(instance)[:, self.resource]
        if abs(rel_d.mean()) > 1e-9 or abs(rel_c.mean()) > 1e-9:
            raise ValueError("relative sizes must average to zero")
        self.rel_demand = rel_d
        self.rel_capacity = rel_c
        self.ratio = dc_ratio(instance)[self.resource]
        self.static = -params.k1 * rel_d[:, None] + params.k2 * rel_c[None, :] - params.b3
        self.no_alloc = params.k0 * self.ratio * rel_d + params.b0
        self.muted = ~instance.coverage_matrix
        self.mute_value = uncovered_input(params)

    def fill(self, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inst = self.instance
        loads = server_loads(inst.demands, cols, inst.n_s)
        return loads, loads / inst.capacities

    def allocation_part(self, cols: np.ndarray) -> np.ndarray:
        inst = self.instance
        loads, f = self.fill(cols)
        lb = self.curve(f.max(axis=1))
        theta = cosine_matrix(inst.demands, inst.capacities - loads)
        out = lb[None, :] + self.static + self.params.k3 * theta
        out[self.muted] = self.mute_value
        return out

    def __call__(self, cols: np.ndarray) -> np.ndarray:
        inst = self.instance
        out = np.empty((inst.n_u, inst.n_s + 1))
        out[:, : inst.n_s] = self.allocation_part(cols)
        out[:, inst.n_s] = self.no_alloc
        return out


# ---------------------------------------------------------------------------
# allocation-level API


def cosine_similarities(instance: Instance, allocation: Allocation) -> np.ndarray:
    cols = allocation.to_columns(instance.n_s)
    loads = server_loads(instance.demands, cols, instance.n_s)
    return cosine_matrix(instance.demands, instance.capacities - loads)


def allocation_input(instance: Instance, allocation: Allocation, curve: LoadbiasCurve,
                     params: HeuristicParams) -> np.ndarray:
    gen = InputGenerator(instance, params, curve)
    return gen.allocation_part(allocation.to_columns(instance.n_s))


def no_alloc_input(instance: Instance, params: HeuristicParams) -> np.ndarray:
    res = largeness_resource(instance, params.largeness)
    rel_d = relative_demands_array(instance)[:, res]
    return params.k0 * dc_ratio(instance)[res] * rel_d + params.b0


def external_inputs(instance: Instance, allocation: Allocation, curve: LoadbiasCurve,
                    params: HeuristicParams) -> np.ndarray:
    gen = InputGenerator(instance, params, curve)
    return gen(allocation.to_columns(instance.n_s))

