"""Central-difference gradient verification."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import NumericError, UsageError
from .tensor import Tensor


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between the autodiff gradient of ``f`` at ``x`` and
    central differences.

    ``x`` is perturbed in place (and restored), so it may be a model
    parameter that ``f`` reads implicitly. The error per coordinate is
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    if not 0 < eps <= 1e-2:
        raise UsageError(f"eps must lie in (0, 1e-2], got {eps}")
    if not x.requires_grad:
        x.requires_grad = True
    x.grad = None
    out = f(x)
    if out.data.size != 1 or not np.all(np.isfinite(out.data)):
        raise NumericError(f"f(x) must be a finite scalar, got {out.data!r}")
    out.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    x.grad = None

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        hi = float(f(x).data)
        flat[k] = orig - eps
        lo = float(f(x).data)
        flat[k] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError("f became non-finite under perturbation")
        numeric.reshape(-1)[k] = (hi - lo) / (2.0 * eps)
    x.grad = None
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    return float(err.max()) if err.size else 0.0
