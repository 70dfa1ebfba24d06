"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, DEFAULT_LR
from errors import DimensionError
from .mlp import Gradients, Mlp


@dataclass
class AdamState:
    """Moment accumulators for one parameter list. Owned by exactly one trainer."""
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    lr: float = DEFAULT_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = DEFAULT_LR, **kwargs) -> "AdamState":
        return cls(
            m=[np.zeros_like(p, dtype=np.float64) for p in params],
            v=[np.zeros_like(p, dtype=np.float64) for p in params],
            lr=lr,
            **kwargs,
        )


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState) -> List[np.ndarray]:
    """
    One Adam update. Returns new parameter arrays; ``state`` is advanced in place.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("params, grads and optimizer state have different lengths")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionError(f"shape mismatch in adam_step: {p.shape}, {g.shape}, {m.shape}")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated


class Adam:
    """Adam bound to a single network."""

    def __init__(self, net: Mlp, lr: float = DEFAULT_LR):
        self.net = net
        self.state = AdamState.for_params(net.params(), lr=lr)

    def step(self, grads: Gradients) -> None:
        self.net.set_params(adam_step(self.net.params(), grads.params(), self.state))
