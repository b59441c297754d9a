"""Periodic Gaussian random fields N(mean, scale^2 (-Laplacian + tau^2 I)^(-alpha)) on [0, 1)."""

from __future__ import annotations

import numpy as np

from .types import GridFunction


def grf_eigenvalues(scale: float, tau: float, alpha: float, nx: int) -> np.ndarray:
    """Covariance eigenvalues for wavenumbers j = 0 .. nx/2 - 1."""
    j = np.arange(nx // 2)
    return scale**2 * (4.0 * np.pi**2 * j**2 + tau**2) ** (-alpha)


def _check(nx: int, alpha: float, tau: float, scale: float):
    if nx < 4 or nx & (nx - 1):
        raise ValueError(f"nx must be a power of two >= 4, got {nx}")
    if alpha <= 0.5:
        raise ValueError(f"alpha must exceed 0.5 for a summable spectrum, got {alpha}")
    if tau <= 0 or scale < 0:
        raise ValueError("tau must be positive and scale non-negative")


def sample_grf_1d_batch(mean: float, scale: float, tau: float, alpha: float, nx: int,
                        rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws on the grid x_m = m/nx, shape (n, nx).

    The constant mode has variance lambda_0; each wavenumber j >= 1 below
    Nyquist contributes sqrt(2 lambda_j) (a_j cos 2 pi j x + b_j sin 2 pi j x)
    with a_j, b_j ~ N(0, 1). The Nyquist mode is dropped.
    """
    _check(nx, alpha, tau, scale)
    lam = grf_eigenvalues(scale, tau, alpha, nx)
    xi = rng.standard_normal((n, 2, nx // 2))
    spec = np.zeros((n, nx // 2 + 1), dtype=complex)
    spec[:, 0] = nx * np.sqrt(lam[0]) * xi[:, 0, 0]
    amp = 0.5 * nx * np.sqrt(2.0 * lam[1:])
    spec[:, 1:nx // 2] = amp * (xi[:, 0, 1:] - 1j * xi[:, 1, 1:])
    return mean + np.fft.irfft(spec, n=nx, axis=-1)


def sample_grf_1d(mean: float, scale: float, tau: float, alpha: float, nx: int,
                  rng: np.random.Generator | int | None = None) -> GridFunction:
    rng = np.random.default_rng(rng)
    values = sample_grf_1d_batch(mean, scale, tau, alpha, nx, rng, 1)[0]
    return GridFunction(values, ((0.0, 1.0),), periodic=True)


def pointwise_variance(scale: float, tau: float, alpha: float, nx: int) -> float:
    lam = grf_eigenvalues(scale, tau, alpha, nx)
    return float(lam[0] + 2.0 * lam[1:].sum())
