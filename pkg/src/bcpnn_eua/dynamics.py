"""BCPNN hypercolumn network with stochastic winner-takes-all activation.

Every user owns one hypercolumn of ``n_s + 1`` units (one per server plus a
trailing no-allocation unit). Units only connect within their own
hypercolumn: a positive self weight and a negative lateral weight.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class NetworkParams:
    alpha: float = 0.27
    w_self: float = 17.0
    w_lat: float = -17.0
    bias: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.w_self <= 0:
            raise ValueError(f"w_self must be positive, got {self.w_self}")
        if self.w_lat >= 0:
            raise ValueError(f"w_lat must be negative, got {self.w_lat}")


@dataclass(frozen=True)
class NetworkState:
    support: np.ndarray
    activation: np.ndarray
    params: NetworkParams
    timestep: int = 0

    @property
    def winners(self) -> np.ndarray:
        """Index of the active unit in each hypercolumn."""
        return self.activation.argmax(axis=1)


def one_hot(winners: np.ndarray, n_units: int) -> np.ndarray:
    a = np.zeros((len(winners), n_units))
    a[np.arange(len(winners)), winners] = 1.0
    return a


def init_network(n_u: int, n_s: int, params: NetworkParams, rng: np.random.Generator) -> NetworkState:
    """Zero supports and a uniformly drawn active unit per hypercolumn."""
    if n_u < 1 or n_s < 1:
        raise ValueError("network needs n_u >= 1 and n_s >= 1")
    n_units = n_s + 1
    winners = rng.integers(0, n_units, size=n_u)
    return NetworkState(np.zeros((n_u, n_units)), one_hot(winners, n_units), params, 0)


def raw_support(state: NetworkState, external_input: np.ndarray) -> np.ndarray:
    a = state.activation
    if external_input.shape != a.shape:
        raise ValueError(f"input shape {external_input.shape} != network shape {a.shape}")
    p = state.params
    others = a.sum(axis=1, keepdims=True) - a
    return p.bias + external_input + p.w_self * a + p.w_lat * others


def update_support(state: NetworkState, raw: np.ndarray) -> NetworkState:
    alpha = state.params.alpha
    return replace(state, support=(1.0 - alpha) * state.support + alpha * raw)


def confidences(state: NetworkState) -> np.ndarray:
    return softmax_rows(state.support)


def softmax_rows(support: np.ndarray) -> np.ndarray:
    z = support - support.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sample_winners(conf: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row; returns the sampled column indices."""
    cdf = np.cumsum(conf, axis=1)
    u = rng.random(conf.shape[0]) * cdf[:, -1]
    # strict '<' skips zero-probability units even when u lands on a cdf step
    idx = (u[:, None] < cdf).argmax(axis=1)
    return idx


def sample_activation(conf: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return one_hot(sample_winners(conf, rng), conf.shape[1])


def step(state: NetworkState, external_input: np.ndarray, rng: np.random.Generator) -> NetworkState:
    raw = raw_support(state, external_input)
    state = update_support(state, raw)
    act = sample_activation(confidences(state), rng)
    return replace(state, activation=act, timestep=state.timestep + 1)
