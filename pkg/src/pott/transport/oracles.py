"""Exact optimal transport references for small or Gaussian problems."""

from __future__ import annotations

import itertools

import numpy as np

MAX_EXHAUSTIVE = 8


def kantorovich_lp(src_points, tgt_points, cost_matrix=None):
    """Exact OT between two equal-size uniform point clouds.

    With uniform equal marginals the extreme points of the coupling
    polytope are permutation matrices (Birkhoff), so enumerating all
    assignments solves the linear program. Returns (coupling, cost) where
    the coupling has entries 1/n and cost is the mean matched cost.
    """
    src = np.asarray(src_points, dtype=np.float64)
    tgt = np.asarray(tgt_points, dtype=np.float64)
    n = len(src)
    if len(tgt) != n:
        raise ValueError("point clouds must have equal size")
    if n > MAX_EXHAUSTIVE:
        raise ValueError(f"{n} points exceed the exhaustive bound of {MAX_EXHAUSTIVE}")
    if cost_matrix is None:
        diff = src.reshape(n, 1, -1) - tgt.reshape(1, n, -1)
        cost_matrix = np.mean(diff**2, axis=-1)
    C = np.asarray(cost_matrix, dtype=np.float64)
    if C.shape != (n, n):
        raise ValueError(f"cost matrix shape {C.shape} does not match {n} points")
    rows = np.arange(n)
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        total = C[rows, perm].sum()
        if total < best:
            best, best_perm = total, perm
    coupling = np.zeros((n, n))
    coupling[rows, best_perm] = 1.0 / n
    return coupling, best / n


def semi_dual_value(cost_matrix, potential) -> float:
    """mean_i min_j (C_ij - g_j) + mean_j g_j, a lower bound on the OT cost."""
    C = np.asarray(cost_matrix, dtype=np.float64)
    g = np.asarray(potential, dtype=np.float64)
    return float(np.mean(np.min(C - g[None, :], axis=1)) + np.mean(g))


def gaussian_monge_oracle(mu_s: float, sigma_s: float, mu_t: float, sigma_t: float):
    """Monge map T(x) = b + a (x - mu_s) between 1-d Gaussians; returns (a, b)."""
    if sigma_s <= 0 or sigma_t <= 0:
        raise ValueError("standard deviations must be positive")
    return sigma_t / sigma_s, float(mu_t)
