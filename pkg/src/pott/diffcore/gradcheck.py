from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import NonFiniteError, Tensor, backward, no_grad


def finite_diff_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-6) -> float:
    """Max over coordinates of |analytic - central difference| / (|analytic| + 1e-12)."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    leaf = Tensor(x0.copy(), requires_grad=True)
    out = f(leaf)
    backward(out)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(x0)

    numeric = np.empty_like(x0)
    flat = x0.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            up, down = orig + h, orig - h
            flat[i] = up
            fp = f(Tensor(x0)).item()
            flat[i] = down
            fm = f(Tensor(x0)).item()
            flat[i] = orig
            # divide by the representable step, not 2h
            numeric.reshape(-1)[i] = (fp - fm) / (up - down)
    if not (np.all(np.isfinite(numeric)) and np.all(np.isfinite(analytic))):
        raise NonFiniteError("finite_diff_check: non-finite evaluation")
    return float(np.max(np.abs(analytic - numeric) / (np.abs(analytic) + 1e-12)))
