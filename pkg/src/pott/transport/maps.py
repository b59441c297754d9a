"""Transport map and dual potential networks."""

from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, no_grad, ops
from ..neural_ops.layers import MLP, Module
from ..neural_ops.models import Standardizer


class ResidualMLP(Module):
    """x + mlp(x) with the last layer zeroed, so it starts as the identity."""

    def __init__(self, dim: int, hidden, rng: np.random.Generator, activation: str = "tanh"):
        super().__init__()
        self.dim = dim
        self.net = self.child("net", MLP([dim, *hidden, dim], rng, activation))
        last = self.net.layers[-1]
        last.weight.data[:] = 0.0
        last.bias.data[:] = 0.0

    def __call__(self, x):
        return x + self.net(x)


class TransportMap(Module):
    """T(k, u) = (T_k(k), T_u(u)) on flattened standardised fields.

    The two components share nothing, so T_k never sees u and T_u never
    sees k. ``scaling`` converts between physical and standardised units.
    """

    def __init__(self, k_shape, u_shape, rng: np.random.Generator, hidden=(256, 256),
                 activation: str = "tanh", scaling: Standardizer | None = None):
        super().__init__()
        self.k_shape, self.u_shape = tuple(k_shape), tuple(u_shape)
        self.n_k = int(np.prod(self.k_shape))
        self.n_u = int(np.prod(self.u_shape)) if self.u_shape else 0
        self.hidden, self.activation = tuple(hidden), activation
        self.scaling = scaling or Standardizer()
        self.t_k = self.child("t_k", ResidualMLP(self.n_k, hidden, rng, activation))
        self.t_u = (self.child("t_u", ResidualMLP(self.n_u, hidden, rng, activation))
                    if self.n_u else None)

    def map_k(self, zk):
        return self.t_k(zk)

    def map_u(self, zu):
        return zu if self.t_u is None else self.t_u(zu)

    def __call__(self, zk, zu):
        return self.map_k(zk), self.map_u(zu)

    def standardize(self, k: np.ndarray, u: np.ndarray):
        n = len(k)
        zk = self.scaling.k_forward(np.asarray(k, dtype=np.float64)).reshape(n, self.n_k)
        zu = self.scaling.u_forward(np.asarray(u, dtype=np.float64)).reshape(n, self.n_u)
        return zk, zu

    def transport(self, k: np.ndarray, u: np.ndarray):
        """Apply T to physical fields; returns physical (k_r, u_r)."""
        n = len(k)
        zk, zu = self.standardize(k, u)
        with no_grad():
            tk, tu = self(Tensor(zk), Tensor(zu))
        s = self.scaling
        k_r = (tk.data * s.k_std + s.k_mean).reshape((n, *self.k_shape))
        u_r = (tu.data * s.u_std + s.u_mean).reshape((n, *self.u_shape))
        return k_r, u_r

    def config(self) -> dict:
        return {"k_shape": list(self.k_shape), "u_shape": list(self.u_shape),
                "hidden": list(self.hidden), "activation": self.activation,
                "scaling": self.scaling.__dict__.copy()}


class DualPotential(Module):
    """Scalar potential f(k, u) on the concatenated standardised fields."""

    def __init__(self, dim: int, rng: np.random.Generator, hidden=(256, 256),
                 activation: str = "tanh"):
        super().__init__()
        self.dim, self.hidden, self.activation = dim, tuple(hidden), activation
        self.net = self.child("net", MLP([dim, *hidden, 1], rng, activation))

    def __call__(self, zk, zu):
        x = zk if zu.shape[-1] == 0 else ops.concat([zk, zu], axis=1)
        return ops.reshape(self.net(x), (x.shape[0],))
