"""Focal, binary cross-entropy and weighted total losses."""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..autodiff.tensor import make_result
from .config import LossWeights

EPS = 1e-7


def _binary_target(target, shape) -> np.ndarray:
    t = np.asarray(target, dtype=np.float64)
    if t.shape != shape:
        t = np.broadcast_to(t, shape) if t.ndim == 0 else t
    if t.shape != shape:
        raise ValueError(f"prediction shape {shape} does not match target shape {t.shape}")
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("targets must be 0 or 1")
    return t


def focal_loss(pred: Tensor, target, alpha: float = 0.25, gamma: float = 2.0) -> Tensor:
    """Mean over pixels of -alpha * (1 - p_t)^gamma * log(p_t).

    p_t is the predicted probability of the true class; predictions are
    clamped to [EPS, 1 - EPS] and the clamp passes no gradient.
    """
    pred = ad.tensor.as_tensor(pred)
    t = _binary_target(target, pred.shape).astype(pred.dtype)
    p = pred.data.astype(np.float64)
    inside = (p >= EPS) & (p <= 1 - EPS)
    pc = np.clip(p, EPS, 1 - EPS)
    pt = np.where(t == 1, pc, 1 - pc)
    mod = (1 - pt) ** gamma
    loss = -alpha * mod * np.log(pt)
    n = p.size

    def backward_fn(g):
        # d/dpt of -(1-pt)^g log pt, then the sign of dpt/dp.
        term = gamma * (1 - pt) ** (gamma - 1) * np.log(pt) if gamma else 0.0
        dpt = alpha * (term - mod / pt)
        dp = np.where(t == 1, dpt, -dpt) * inside
        return ((g / n) * dp).astype(pred.dtype),

    return make_result(np.asarray(loss.mean(), dtype=pred.dtype), (pred,), backward_fn, "focal_loss")


def bce_loss(score: Tensor, label) -> Tensor:
    """Mean binary cross-entropy of probabilities against 0/1 labels."""
    score = ad.tensor.as_tensor(score)
    y = _binary_target(label, score.shape)
    p = score.data.astype(np.float64)
    inside = (p >= EPS) & (p <= 1 - EPS)
    pc = np.clip(p, EPS, 1 - EPS)
    loss = -(y * np.log(pc) + (1 - y) * np.log(1 - pc))
    n = p.size

    def backward_fn(g):
        dp = (pc - y) / (pc * (1 - pc)) * inside
        return ((g / n) * dp).astype(score.dtype),

    return make_result(np.asarray(loss.mean(), dtype=score.dtype), (score,), backward_fn, "bce_loss")


def _value(x) -> float:
    return x.item() if isinstance(x, Tensor) else float(x)


def total_loss(l_global, l_local, l_gen, w: LossWeights):
    """mu * (L_global + sigma * L_local) + lambda * L_gen.

    Works on plain numbers or on scalar Tensors (then differentiable).
    """
    for name, v in (("global", l_global), ("local", l_local), ("gen", l_gen)):
        if not math.isfinite(_value(v)):
            raise ValueError(f"non-finite {name} loss {_value(v)}")
    if not any(isinstance(v, Tensor) for v in (l_global, l_local, l_gen)):
        return w.mu * (float(l_global) + w.sigma * float(l_local)) + w.lam * float(l_gen)
    l_global, l_local, l_gen = (ad.tensor.as_tensor(v) for v in (l_global, l_local, l_gen))
    adv = ad.add(l_global, ad.mul(l_local, w.sigma))
    return ad.add(ad.mul(adv, w.mu), ad.mul(l_gen, w.lam))
