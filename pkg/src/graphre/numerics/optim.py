"""AdamW with decoupled weight decay."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import UsageError
from .nn import Parameter


def adamw_step(
    params: Iterable[Parameter],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """Apply one AdamW update to every parameter holding a gradient.

    Weight decay shrinks the weights directly (``w *= 1 - lr * wd``) instead of
    being folded into the gradient. Gradients are cleared afterwards.
    """
    if lr <= 0 or not 0 <= beta1 < 1 or not 0 <= beta2 < 1 or eps <= 0 or weight_decay < 0:
        raise UsageError("adamw_step: invalid hyperparameters")
    params = list(params)
    live = [p for p in params if p.grad is not None]
    if not live:
        raise UsageError("adamw_step called before any backward pass")
    for p in live:
        g = p.grad
        p.step += 1
        p.exp_avg *= beta1
        p.exp_avg += (1.0 - beta1) * g
        p.exp_avg_sq *= beta2
        p.exp_avg_sq += (1.0 - beta2) * g * g
        m_hat = p.exp_avg / (1.0 - beta1 ** p.step)
        v_hat = p.exp_avg_sq / (1.0 - beta2 ** p.step)
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    for p in params:
        p.grad = None


class AdamW:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay

    def step(self) -> None:
        adamw_step(self.params, self.lr, self.betas[0], self.betas[1], self.eps, self.weight_decay)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def clip_grad_norm(params: Iterable[Parameter], max_norm: float) -> float:
    """Rescale gradients in place so their joint L2 norm is at most ``max_norm``."""
    params = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float((p.grad ** 2).sum()) for p in params)))
    if total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * scale
    return total
