"""DeepONet and 1-d FNO operator models over numpy grids."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..diffcore import Tensor, no_grad, ops
from ..pde_data.types import GridFunction
from .layers import MLP, Linear, Module


class ResolutionError(ValueError):
    pass


@dataclass
class Standardizer:
    """Scalar affine normalisation of inputs and outputs."""

    k_mean: float = 0.0
    k_std: float = 1.0
    u_mean: float = 0.0
    u_std: float = 1.0

    @classmethod
    def fit(cls, k: np.ndarray, u: np.ndarray) -> "Standardizer":
        ks, us = float(np.std(k)), float(np.std(u))
        return cls(float(np.mean(k)), ks if ks > 0 else 1.0,
                   float(np.mean(u)), us if us > 0 else 1.0)

    def k_forward(self, k):
        return (k - self.k_mean) / self.k_std

    def u_forward(self, u):
        return (u - self.u_mean) / self.u_std

    def u_inverse(self, z):
        return z * self.u_std + self.u_mean


class OperatorModel(Module):
    arch = ""

    def __init__(self, k_shape, u_shape):
        super().__init__()
        self.k_shape = tuple(k_shape)
        self.u_shape = tuple(u_shape)
        self.stats = Standardizer()

    def forward(self, kz) -> Tensor:
        """Standardised inputs (B, *k_shape) to standardised outputs (B, *u_shape)."""
        raise NotImplementedError

    def head_names(self) -> list[str]:
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError

    def _check_input(self, k: np.ndarray):
        if tuple(k.shape[1:]) != self.k_shape:
            raise ResolutionError(f"{self.arch} expects inputs of shape {self.k_shape}, "
                                  f"got {tuple(k.shape[1:])}")

    def predict_array(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        self._check_input(k)
        with no_grad():
            z = self.forward(Tensor(self.stats.k_forward(k)))
        return self.stats.u_inverse(z.data)

    def predict(self, k: GridFunction, u_extents=None, u_periodic=False) -> GridFunction:
        out = self.predict_array(k.values[None])[0]
        ext = u_extents or ((0.0, 1.0),) * out.ndim
        return GridFunction(out, ext, u_periodic)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


class DeepONet(OperatorModel):
    """u(x) = sum_p branch_p(k) trunk_p(x) + bias over a fixed output grid."""

    arch = "deeponet"

    def __init__(self, k_shape, u_axes, rng: np.random.Generator, branch_hidden=(128, 128),
                 trunk_hidden=(128, 128), latent: int = 64, activation: str = "tanh"):
        u_axes = [np.asarray(a, dtype=np.float64) for a in u_axes]
        super().__init__(k_shape, tuple(len(a) for a in u_axes))
        self.u_axes = u_axes
        self.latent = latent
        self.activation = activation
        self.branch_hidden, self.trunk_hidden = tuple(branch_hidden), tuple(trunk_hidden)
        n_k = int(np.prod(self.k_shape))
        self.branch = self.child("branch", MLP([n_k, *branch_hidden, latent], rng, activation))
        self.trunk = self.child("trunk", MLP([len(u_axes), *trunk_hidden, latent], rng,
                                             activation, final_activation=True))
        self.bias = self.param("bias", np.zeros(1))
        mesh = np.meshgrid(*u_axes, indexing="ij")
        self.coords = np.stack([m.ravel() for m in mesh], axis=1)

    def forward(self, kz) -> Tensor:
        b = kz.shape[0]
        br = self.branch(ops.reshape(kz, (b, -1)))
        tr = self.trunk(Tensor(self.coords))
        out = ops.matmul(br, ops.transpose(tr)) + self.bias
        return ops.reshape(out, (b, *self.u_shape))

    def head_names(self) -> list[str]:
        nb, nt = len(self.branch.layers) - 1, len(self.trunk.layers) - 1
        return [f"branch.l{nb}.weight", f"branch.l{nb}.bias",
                f"trunk.l{nt}.weight", f"trunk.l{nt}.bias", "bias"]

    def config(self) -> dict:
        return {"arch": self.arch, "k_shape": list(self.k_shape),
                "u_axes": [a.tolist() for a in self.u_axes],
                "branch_hidden": list(self.branch_hidden), "trunk_hidden": list(self.trunk_hidden),
                "latent": self.latent, "activation": self.activation, "stats": asdict(self.stats)}


class SpectralBlock(Module):
    def __init__(self, width: int, modes: int, rng: np.random.Generator):
        super().__init__()
        self.modes = modes
        scale = 1.0 / (width * width)
        self.w_real = self.param("w_real", scale * rng.uniform(0, 1, (width, width, modes)))
        self.w_imag = self.param("w_imag", scale * rng.uniform(0, 1, (width, width, modes)))
        bound = 1.0 / np.sqrt(width)
        self.weight = self.param("weight", rng.uniform(-bound, bound, (width, width)))
        self.bias = self.param("bias", rng.uniform(-bound, bound, (width, 1)))

    def __call__(self, v):
        # v: (batch, width, nx)
        n = v.shape[-1]
        spec = ops.rfft(v)
        low = ops.slice_(spec, (slice(None), slice(None), slice(None), slice(0, self.modes)))
        mixed = ops.irfft(ops.complex_mode_mul(low, self.w_real, self.w_imag), n)
        local = ops.einsum("bix,io->box", v, self.weight) + self.bias
        return ops.gelu(mixed + local)


class FNO1d(OperatorModel):
    """Lift, stacked spectral blocks with gelu, two-layer projection head."""

    arch = "fno1d"

    def __init__(self, nx: int, rng: np.random.Generator, width: int = 32, n_blocks: int = 4,
                 modes: int = 16, head_width: int = 128, use_coord: bool = True):
        super().__init__((nx,), (nx,))
        if nx < 2 or nx & (nx - 1):
            raise ResolutionError(f"FNO grid must be a power of two, got {nx}")
        if modes > nx // 2:
            raise ResolutionError(f"{modes} modes overflow a grid of {nx} (max {nx // 2})")
        self.nx, self.width, self.n_blocks = nx, width, n_blocks
        self.modes, self.head_width, self.use_coord = modes, head_width, use_coord
        self.lift = self.child("lift", Linear(2 if use_coord else 1, width, rng))
        self.blocks = [self.child(f"block{i}", SpectralBlock(width, modes, rng))
                       for i in range(n_blocks)]
        self.head = self.child("head", MLP([width, head_width, 1], rng, "gelu"))
        self.grid = np.arange(nx) / nx

    def forward(self, kz) -> Tensor:
        b = kz.shape[0]
        x = ops.reshape(kz, (b, self.nx, 1))
        if self.use_coord:
            coord = Tensor(np.broadcast_to(self.grid[None, :, None], (b, self.nx, 1)))
            x = ops.concat([x, coord], axis=2)
        v = ops.transpose(self.lift(x), (0, 2, 1))
        for block in self.blocks:
            v = block(v)
        out = self.head(ops.transpose(v, (0, 2, 1)))
        return ops.reshape(out, (b, self.nx))

    def head_names(self) -> list[str]:
        return ["head.l0.weight", "head.l0.bias", "head.l1.weight", "head.l1.bias"]

    def config(self) -> dict:
        return {"arch": self.arch, "nx": self.nx, "width": self.width, "n_blocks": self.n_blocks,
                "modes": self.modes, "head_width": self.head_width, "use_coord": self.use_coord,
                "stats": asdict(self.stats)}


def build_model(config: dict, rng: np.random.Generator | int | None = None) -> OperatorModel:
    """Instantiate a model from :meth:`OperatorModel.config` output."""
    rng = np.random.default_rng(rng)
    cfg = dict(config)
    arch = cfg.pop("arch")
    stats = cfg.pop("stats", None)
    if arch == "fno1d":
        model = FNO1d(cfg.pop("nx"), rng, **cfg)
    elif arch == "deeponet":
        model = DeepONet(cfg.pop("k_shape"), cfg.pop("u_axes"), rng, **cfg)
    else:
        raise ValueError(f"unknown architecture {arch!r}")
    if stats:
        model.stats = Standardizer(**stats)
    return model


def clone_model(model: OperatorModel) -> OperatorModel:
    twin = build_model(model.config(), rng=0)
    twin.load_state_dict(model.state_dict())
    return twin


def default_model(equation: str, k_shape, u_shape, rng) -> OperatorModel:
    """FNO for Burgers, DeepONet on the output grid for advection and Darcy."""
    if equation == "burgers":
        return FNO1d(k_shape[0], rng)
    if equation == "advection":
        axes = [np.arange(u_shape[0]) / u_shape[0], np.linspace(0, 1, u_shape[1])]
    elif equation == "darcy":
        axes = [np.linspace(0, 1, n) for n in u_shape]
    else:
        raise ValueError(f"unknown equation {equation!r}")
    return DeepONet(k_shape, axes, rng)
