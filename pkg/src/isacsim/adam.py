"""Adam optimizer, written out explicitly so its state can be checkpointed
bit-exactly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailureError

__all__ = ["AdamState", "adam_step"]


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray     # first-moment estimate
    v: np.ndarray     # second-moment estimate
    step: int

    @staticmethod
    def initial(n: int) -> "AdamState":
        return AdamState(m=np.zeros(n), v=np.zeros(n), step=0)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns (new params, new state)."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise NumericalFailureError("non-finite gradient passed to the optimizer")
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    if not np.all(np.isfinite(new_params)):
        raise NumericalFailureError("optimizer produced non-finite parameters")
    return new_params, AdamState(m=m, v=v, step=t)
