"""Adam optimizer over named parameter maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .autodiff import Tensor
from .errors import DimensionError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment buffers and step counter for one parameter group."""

    lr: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, Tensor], lr: float, **kw) -> "AdamState":
        state = cls(lr=lr, **kw)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, in place on params and state.

    Missing gradients count as zero (the moments still decay). The step
    counter increments exactly once per call.
    """
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        if name not in state.m:
            raise DimensionError(f"adam_step: no moment buffers for {name!r}")
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise DimensionError(
                f"adam_step: gradient shape {g.shape} != parameter shape "
                f"{p.data.shape} for {name!r}")
        K.adam_update(p.data, g, state.m[name], state.v[name],
                      state.lr, state.beta1, state.beta2, state.eps, c1, c2)


def grads_of(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Collect populated .grad buffers (absent ones are simply omitted)."""
    return {name: p.grad for name, p in params.items() if p.grad is not None}


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None
