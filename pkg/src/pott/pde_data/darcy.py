"""Darcy flow -div(k grad u) = 1 on the unit square or a triangle.

Coefficients are log-Gaussian fields drawn from a truncated Karhunen-Loeve
expansion computed by Nystrom on the node grid. The solver is a 5-point
finite-volume scheme with harmonic-mean face conductivities and zero
Dirichlet data on the boundary of the masked region.
"""

from __future__ import annotations

import functools
import os
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .types import GridFunction

KERNELS = ("sq_exp_l2", "sq_exp_l1")
MASKS = ("square", "triangle")
EIG_TOL = 1e-10


class CGNotConverged(RuntimeError):
    pass


def node_axis(nx: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, nx)


def grid_points(nx: int) -> np.ndarray:
    """(nx*nx, 2) node coordinates, row-major with the first axis being x."""
    x = node_axis(nx)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def kernel_matrix(kernel: str, pts: np.ndarray) -> np.ndarray:
    if kernel == "sq_exp_l2":
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        return np.exp(-0.5 * d2)
    if kernel == "sq_exp_l1":
        d1 = np.abs(pts[:, None, :] - pts[None, :, :]).sum(-1)
        return np.exp(-0.5 * d1**2)
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


def _cache_dir() -> Path | None:
    d = os.environ.get("POTT_CACHE_DIR")
    return Path(d) if d else None


@functools.lru_cache(maxsize=8)
def kl_basis(kernel: str, n_kl: int = 100, nx: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Top ``n_kl`` Nystrom eigenpairs of the kernel on the nx-by-nx node grid.

    Returns (lam, phi): lam descending operator eigenvalues (clipped at 0),
    phi of shape (nx*nx, n_kl) normalised so that mean(phi_i^2) = 1, i.e.
    orthonormal in L2 of the unit square under the uniform quadrature.
    """
    npts = nx * nx
    if not 1 <= n_kl <= npts:
        raise ValueError(f"n_kl={n_kl} must lie in [1, {npts}]")
    cache = _cache_dir()
    path = cache / f"kl_{kernel}_{nx}_{n_kl}.npz" if cache else None
    if path is not None and path.exists():
        with np.load(path) as z:
            return z["lam"], z["phi"]

    K = kernel_matrix(kernel, grid_points(nx))
    try:
        w, v = scipy.linalg.eigh(K, subset_by_index=(npts - n_kl, npts - 1))
    except np.linalg.LinAlgError as e:
        raise RuntimeError(f"eigendecomposition failed for kernel {kernel}") from e
    w, v = w[::-1] / npts, v[:, ::-1] * np.sqrt(npts)
    if w.min() < -EIG_TOL:
        raise ValueError(f"kernel {kernel} has eigenvalue {w.min():.3e} below -{EIG_TOL}")
    lam = np.clip(w, 0.0, None)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, lam=lam, phi=v)
    return lam, v


def kl_field(xi: np.ndarray, kernel: str, nx: int = 64) -> np.ndarray:
    """g = sum_i sqrt(lam_i) xi_i phi_i for xi of shape (..., n_kl); returns (..., nx, nx)."""
    xi = np.asarray(xi, dtype=np.float64)
    lam, phi = kl_basis(kernel, xi.shape[-1], nx)
    g = (xi * np.sqrt(lam)) @ phi.T
    return g.reshape(xi.shape[:-1] + (nx, nx))


def sample_darcy_coeff_batch(kernel: str, rng: np.random.Generator, n: int,
                             n_kl: int = 100, nx: int = 64) -> np.ndarray:
    xi = rng.standard_normal((n, n_kl))
    return np.exp(kl_field(xi, kernel, nx))


def sample_darcy_coeff(kernel: str, n_kl: int = 100, nx: int = 64,
                       rng: np.random.Generator | int | None = None) -> GridFunction:
    rng = np.random.default_rng(rng)
    k = sample_darcy_coeff_batch(kernel, rng, 1, n_kl, nx)[0]
    return GridFunction(k, ((0.0, 1.0), (0.0, 1.0)))


def region_mask(mask: str, nx: int) -> np.ndarray:
    """Nodes inside the closed region (square, or the triangle (0,0), (0,1), (0.5,1))."""
    if mask == "square":
        return np.ones((nx, nx), dtype=bool)
    if mask == "triangle":
        x = node_axis(nx)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return (X >= 0) & (Y <= 1 + 1e-12) & (Y >= 2 * X - 1e-12)
    raise ValueError(f"unknown mask {mask!r}; expected one of {MASKS}")


def interior_mask(region: np.ndarray) -> np.ndarray:
    """Region nodes whose four neighbours are all in the region."""
    padded = np.pad(region, 1, constant_values=False)
    inner = region.copy()
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        inner &= padded[1 + di:1 + di + region.shape[0], 1 + dj:1 + dj + region.shape[1]]
    return inner


def assemble(k: np.ndarray, interior: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """System for the interior unknowns, scaled by h^2 so the load is h^2."""
    nx = k.shape[0]
    h = 1.0 / (nx - 1)
    idx = -np.ones(k.shape, dtype=int)
    idx[interior] = np.arange(interior.sum())
    n = int(interior.sum())
    I, J = np.nonzero(interior)
    row = idx[I, J]
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        kn = k[I + di, J + dj]
        face = 2.0 * k[I, J] * kn / (k[I, J] + kn)
        diag += face
        nb = idx[I + di, J + dj]
        live = nb >= 0
        rows.append(row[live])
        cols.append(nb[live])
        vals.append(-face[live])
    rows.append(row)
    cols.append(row)
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return A, np.full(n, h * h)


def solve_darcy_array(k: np.ndarray, mask: str = "square", rtol: float = 1e-10) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"coefficient must be a square 2-d grid, got {k.shape}")
    if not np.all(k > 0):
        raise ValueError("coefficient must be positive everywhere")
    interior = interior_mask(region_mask(mask, k.shape[0]))
    A, b = assemble(k, interior)
    n = b.size
    precond = sp.diags(1.0 / A.diagonal())
    x, info = spla.cg(A, b, rtol=0.5 * rtol, atol=0.0, maxiter=10 * n, M=precond)
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if info != 0 or res >= rtol:
        raise CGNotConverged(f"CG stopped with relative residual {res:.3e} (info={info})")
    u = np.zeros_like(k)
    u[interior] = x
    return u


def solve_darcy(k: GridFunction, mask: str = "square") -> GridFunction:
    return GridFunction(solve_darcy_array(k.values, mask), k.extents)


def discrete_residual(k: np.ndarray, u: np.ndarray, mask: str = "square") -> float:
    interior = interior_mask(region_mask(mask, k.shape[0]))
    A, b = assemble(k, interior)
    return float(np.linalg.norm(A @ u[interior] - b) / np.linalg.norm(b))
