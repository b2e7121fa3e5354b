"""SGD with momentum and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import DimensionError, ValidationError
from .params import ParameterSet

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    """Hyper-parameters plus per-parameter accumulators.

    For ``sgd-momentum`` the accumulator ``v/<name>`` is the velocity. For
    ``adam`` the accumulators are the first (``m/<name>``) and second
    (``v/<name>``) moment estimates.
    """

    kind: str
    lr: float
    momentum: float = 0.9
    beta1: float = ADAM_BETAS[0]
    beta2: float = ADAM_BETAS[1]
    eps: float = ADAM_EPS
    step: int = 0
    accumulators: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd-momentum", "adam"):
            raise ValidationError(f"unknown optimizer kind {self.kind!r}")
        if not self.lr >= 0.0:
            raise ValidationError("learning rate must be non-negative")

    def scalars(self) -> dict:
        return {
            "kind": self.kind,
            "lr": self.lr,
            "momentum": self.momentum,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step": self.step,
        }

    def copy(self) -> "OptimizerState":
        return OptimizerState(**self.scalars(), accumulators={k: v.copy() for k, v in self.accumulators.items()})


def sgd_momentum(params: ParameterSet, lr: float = 1e-4, momentum: float = 0.9) -> OptimizerState:
    acc = {f"v/{k}": np.zeros(s) for k, s in params.shapes.items()}
    return OptimizerState("sgd-momentum", lr, momentum=momentum, accumulators=acc)


def adam(params: ParameterSet, lr: float = 1e-3, betas=ADAM_BETAS, eps: float = ADAM_EPS) -> OptimizerState:
    acc = {}
    for k, s in params.shapes.items():
        acc[f"m/{k}"] = np.zeros(s)
        acc[f"v/{k}"] = np.zeros(s)
    return OptimizerState("adam", lr, beta1=betas[0], beta2=betas[1], eps=eps, accumulators=acc)


def optimizer_step(state: OptimizerState, params: ParameterSet, grads: Mapping[str, np.ndarray]) -> ParameterSet:
    """Apply one update; ``state`` accumulators advance in place."""
    state.step += 1
    updated = {}
    for name in params:
        g = np.asarray(grads[name], dtype=np.float64)
        p = params[name]
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name!r} has shape {g.shape}, expected {p.shape}")
        if state.kind == "sgd-momentum":
            v = state.momentum * state.accumulators[f"v/{name}"] + g
            state.accumulators[f"v/{name}"] = v
            updated[name] = p - state.lr * v
        else:
            m = state.beta1 * state.accumulators[f"m/{name}"] + (1.0 - state.beta1) * g
            v = state.beta2 * state.accumulators[f"v/{name}"] + (1.0 - state.beta2) * g * g
            state.accumulators[f"m/{name}"] = m
            state.accumulators[f"v/{name}"] = v
            m_hat = m / (1.0 - state.beta1**state.step)
            v_hat = v / (1.0 - state.beta2**state.step)
            updated[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params.replace(updated)
