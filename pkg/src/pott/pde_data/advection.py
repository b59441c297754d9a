"""Linear advection u_t + nu u_x = 0 solved exactly along characteristics.

The initial condition is extended periodically from [0, 1), so
u(x, t) = u0((x - nu t) mod 1), read off the u0 grid by linear
interpolation. A uniform shift of a linear interpolant preserves the
periodic trapezoid sum, so discrete mass is conserved to round-off.
"""

from __future__ import annotations

import math

import numpy as np

from .types import GridFunction


def time_grid(nt: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, nt)


def space_grid(nx: int) -> np.ndarray:
    return np.arange(nx) / nx


def solve_advection_batch(u0: np.ndarray, nu: float, nt: int = 50) -> np.ndarray:
    """u0 of shape (n, nx) on x_i = i/nx; returns (n, nx, nt)."""
    u0 = np.atleast_2d(np.asarray(u0, dtype=np.float64))
    n, nx = u0.shape
    if nx < 2 or nt < 1:
        raise ValueError(f"invalid grid nx={nx}, nt={nt}")
    out = np.empty((n, nx, nt))
    idx = np.arange(nx)
    for m, t in enumerate(time_grid(nt)):
        shift = math.fmod(nu * t, 1.0) * nx  # in grid cells
        pos = np.mod(idx - shift, nx)
        lo = np.floor(pos).astype(int)
        w = pos - lo
        lo %= nx
        hi = (lo + 1) % nx
        out[:, :, m] = (1.0 - w) * u0[:, lo] + w * u0[:, hi]
    return out


def solve_advection(u0: GridFunction, nu: float, nt: int = 50) -> GridFunction:
    if u0.values.ndim != 1:
        raise ValueError("advection initial condition must be 1-d")
    out = solve_advection_batch(u0.values[None], nu, nt)[0]
    return GridFunction(out, ((0.0, 1.0), (0.0, 1.0)), periodic=(True, False))
