"""Adam optimizer with bias correction, operating on Tensor leaves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, Tensor


@dataclass
class AdamState:
    """Per-parameter moment buffers and step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_tensor(cls, param: Tensor, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=np.zeros_like(param.data),
            v=np.zeros_like(param.data),
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_update(param: Tensor, grad: np.ndarray, state: AdamState,
                learning_rate: float) -> Tensor:
    """One Adam step: mutates ``param.data`` and ``state`` in place.

    Uses the original formulation: theta -= lr * m_hat / (sqrt(v_hat) + eps),
    so the first step moves each coordinate by at most ~lr.
    """
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != param.data.shape:
        raise ShapeError(
            f"adam_update: gradient shape {g.shape} does not match "
            f"parameter shape {param.data.shape}"
        )
    if state.m.shape != param.data.shape or state.v.shape != param.data.shape:
        raise ShapeError("adam_update: state buffers do not match parameter shape")
    if not np.all(np.isfinite(g)):
        bad = int(np.flatnonzero(~np.isfinite(g))[0])
        raise FloatingPointError(
            f"non-finite gradient at step {state.t + 1} (first bad "
            f"coordinate {bad})"
        )
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    param.data -= learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return param


class Adam:
    """Convenience wrapper stepping several named parameters together."""

    def __init__(self, params: dict[str, Tensor], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.states = {
            name: AdamState.for_tensor(p, beta1, beta2, eps)
            for name, p in params.items()
        }

    def step(self):
        for name, p in self.params.items():
            if p.grad is None:
                continue
            adam_update(p, p.grad, self.states[name], self.learning_rate)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
