from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, ops

ACTIVATIONS = {"tanh": ops.tanh, "relu": ops.relu, "gelu": ops.gelu}


class Module:
    """Holds named parameter tensors in registration order."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Module] = {}

    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = [(prefix + n, p) for n, p in self._params.items()]
        for cname, c in self._children.items():
            out.extend(c.named_parameters(f"{prefix}{cname}."))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = dict(self.named_parameters())
        if set(params) != set(state):
            missing = set(params) ^ set(state)
            raise KeyError(f"state dict keys differ from the model: {sorted(missing)}")
        for n, p in params.items():
            v = np.asarray(state[n], dtype=np.float64)
            if v.shape != p.shape:
                raise ValueError(f"{n}: shape {v.shape} does not match {p.shape}")
            p.data = v.copy()

    def set_requires_grad(self, flag: bool):
        for p in self.parameters():
            p.requires_grad = flag
            if not flag:
                p.grad = None

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.weight = self.param("weight", uniform_init(rng, n_in, (n_in, n_out)))
        self.bias = self.param("bias", uniform_init(rng, n_in, (n_out,)))

    def __call__(self, x):
        return ops.affine(x, self.weight, self.bias)


class MLP(Module):
    """Affine layers with an activation between them.

    ``final_activation`` also applies it after the last layer.
    """

    def __init__(self, sizes, rng: np.random.Generator, activation: str = "tanh",
                 final_activation: bool = False):
        super().__init__()
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.act = ACTIVATIONS[activation]
        self.activation = activation
        self.final_activation = final_activation
        self.layers = [self.child(f"l{i}", Linear(a, b, rng))
                       for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def __call__(self, x):
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_activation:
                x = self.act(x)
        return x
