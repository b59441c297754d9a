from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NonFiniteError, Tensor


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, param: Tensor, **hparams) -> "AdamState":
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), **hparams)


def adam_step(param: Tensor, state: AdamState, lr: float | None = None) -> Tensor:
    """One bias-corrected Adam update of ``param`` in place; clears its grad."""
    g = param.grad
    if g is None:
        raise ValueError(f"adam_step: parameter {param.name or param.shape} has no gradient")
    if g.shape != param.shape or state.m.shape != param.shape:
        raise ValueError("adam_step: state shape does not match parameter")
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"adam_step: non-finite gradient for {param.name or param.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    step = state.lr if lr is None else lr
    param.data = param.data - step * m_hat / (np.sqrt(v_hat) + state.eps)
    param.grad = None
    return param


@dataclass
class ParamGroup:
    params: list
    lr: float
    states: list = field(default_factory=list)


class Adam:
    """Adam over one or more parameter groups, each with its own base lr.

    ``step(scale)`` multiplies every group's lr by ``scale``; schedules are
    applied that way so the lr ratio between groups is preserved.
    """

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        groups = params if params and isinstance(params[0], dict) else [{"params": params}]
        self.betas = betas
        self.eps = eps
        self.groups: list[ParamGroup] = []
        for spec in groups:
            plist = list(spec["params"])
            glr = spec.get("lr", lr)
            if glr <= 0:
                raise ValueError("learning rate must be positive")
            states = [AdamState.zeros_like(p, lr=glr, beta1=betas[0], beta2=betas[1], eps=eps)
                      for p in plist]
            self.groups.append(ParamGroup(plist, glr, states))

    @property
    def params(self):
        return [p for g in self.groups for p in g.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, scale: float = 1.0):
        for group in self.groups:
            for p, st in zip(group.params, group.states):
                adam_step(p, st, lr=group.lr * scale)
