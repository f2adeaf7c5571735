"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Param


@dataclass
class OptimizerState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(params: dict[str, Param], state: OptimizerState):
    """Apply one Adam update in place and clear the gradients.

    Raises if any parameter has no gradient: a silent skip would desync the
    moment estimates from the step counter.
    """
    missing = [name for name, p in params.items() if p.grad is None]
    if missing:
        raise ValueError(f"parameters without gradients: {', '.join(missing[:5])}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = p.grad.astype(p.data.dtype, copy=False)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        if m.shape != p.shape:
            raise ValueError(f"optimizer moments for {name} have shape {m.shape}, parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data = p.data - (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.data.dtype)
        p.grad = None
