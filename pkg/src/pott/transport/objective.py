"""Transport cost and physical regularisers."""

from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, ops


def transport_cost(x, y) -> float:
    """(||k_x - k_y||^2 + ||u_x - u_y||^2) / (n_k + n_u) for two (k, u) pairs.

    Pairs may be SamplePairs (GridFunction fields) or plain (k, u) tuples.
    """
    kx, ux = _pair(x)
    ky, uy = _pair(y)
    if kx.shape != ky.shape or ux.shape != uy.shape:
        raise ValueError(f"shape mismatch: {kx.shape}/{ux.shape} vs {ky.shape}/{uy.shape}")
    n = kx.size + ux.size
    return float((np.sum((kx - ky) ** 2) + np.sum((ux - uy) ** 2)) / n)


def _pair(p):
    if hasattr(p, "k"):
        k, u = p.k, p.u
    else:
        k, u = p
    k = np.asarray(getattr(k, "values", k), dtype=np.float64)
    u = np.asarray(getattr(u, "values", u), dtype=np.float64)
    return k, u


def batch_cost(zk: np.ndarray, zu: np.ndarray, tk: Tensor, tu: Tensor) -> Tensor:
    """Per-sample normalised squared distance between inputs and their images."""
    n = zk.shape[1] + zu.shape[1]
    c = ops.reduce_sum(ops.square(tk - zk), axis=1)
    if zu.shape[1]:
        c = c + ops.reduce_sum(ops.square(tu - zu), axis=1)
    return c * (1.0 / n)


def consistency_penalty(model, tk: Tensor, tu: Tensor) -> Tensor:
    """Batch mean of mean_x (G(T_k k) - T_u u)^2 in standardised u units.

    ``model`` is the source operator; its parameters should be frozen by
    the caller so only the transport map receives gradients.
    """
    b = tk.shape[0]
    if int(np.prod(model.k_shape)) != tk.shape[1]:
        raise ValueError(f"operator expects inputs of shape {model.k_shape}, "
                         f"transported k has {tk.shape[1]} values")
    pred = model.forward(ops.reshape(tk, (b, *model.k_shape)))
    pred = ops.reshape(pred, (b, -1))
    if pred.shape[1] != tu.shape[1]:
        raise ValueError(f"operator output size {pred.shape[1]} vs transported u {tu.shape[1]}")
    return ops.reduce_mean(ops.square(pred - tu))


def conservation_variance(u, u_shape) -> Tensor:
    """Mean over samples of var_t(integral_x u(x, t) dx).

    ``u`` is (batch, nx*nt) or (batch, nx, nt) on a periodic x grid over
    [0, 1), where the trapezoid rule reduces to the mean over x.
    """
    u = u if isinstance(u, Tensor) else Tensor(u)
    if len(u_shape) != 2:
        raise ValueError(f"conservation needs space-time fields, got shape {u_shape}")
    b = u.shape[0]
    grid = ops.reshape(u, (b, *u_shape))
    mass = ops.reduce_mean(grid, axis=1)                      # (b, nt)
    dev = mass - ops.reduce_mean(mass, axis=1, keepdims=True)
    return ops.reduce_mean(ops.reduce_mean(ops.square(dev), axis=1))


def phys_reg_generic(T, zk: np.ndarray, zu: np.ndarray, model) -> Tensor:
    tk, tu = T(Tensor(zk), Tensor(zu))
    return consistency_penalty(model, tk, tu)


def phys_reg_conservation(T, zu: np.ndarray) -> Tensor:
    return conservation_variance(T.map_u(Tensor(zu)), T.u_shape)
