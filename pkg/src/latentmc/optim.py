"""Adaptive-moment gradient optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .errors import ContractError, NumericError

__all__ = ["Adam", "clip_global_norm"]


class Adam:
    """Standard Adam over a list of parameter Tensors.

    Moments are stored per parameter; ``step`` reads ``p.grad`` (a missing
    grad counts as zero). A non-finite gradient aborts before touching any
    parameter, so a failed step never leaves a partial update.
    """

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if learning_rate <= 0 or not (0 <= beta1 < 1) or not (0 <= beta2 < 1) or epsilon <= 0:
            raise ContractError("invalid Adam hyperparameters")
        self.params: list[Tensor] = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        grads = []
        for p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient passed to Adam; no update applied")
            grads.append(g)
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.first_moment, self.second_moment):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)

    # -- checkpoint support --------------------------------------------------

    def state_arrays(self) -> dict:
        out = {"adam/step_count": np.array([self.step_count], dtype=np.float64)}
        for i, (m, v) in enumerate(zip(self.first_moment, self.second_moment)):
            out[f"adam/m/{i}"] = m
            out[f"adam/v/{i}"] = v
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        self.step_count = int(arrays["adam/step_count"][0])
        for i in range(len(self.params)):
            self.first_moment[i] = arrays[f"adam/m/{i}"].copy()
            self.second_moment[i] = arrays[f"adam/v/{i}"].copy()


def clip_global_norm(params, max_norm: float) -> float:
    """Scale all grads so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm
