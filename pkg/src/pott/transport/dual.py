"""Min-max training of the transport map against a dual potential."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..diffcore import Adam, NonFiniteError, Tensor, backward, no_grad, ops
from ..neural_ops.models import Standardizer
from .maps import DualPotential, TransportMap
from .objective import batch_cost, consistency_penalty, conservation_variance

REGULARIZERS = ("none", "generic", "conservation")


class TransportDiverged(FloatingPointError):
    def __init__(self, msg: str, trace: list):
        super().__init__(msg)
        self.trace = list(trace)


@dataclass
class PottConfig:
    lam: float = 1.0
    beta: float = 0.5
    reg: str = "none"
    n_outer: int = 1000
    n_inner: int = 10
    transfer_epochs: int = 100
    lr_T: float = 1e-3
    lr_f: float = 1e-3
    batch_src: int = 20
    batch_tgt: int = 20
    t_hidden: tuple = (256, 256)
    f_hidden: tuple = (256, 256)
    activation: str = "tanh"
    standardize: bool = True
    schedule: str = "constant"  # or "cosine" over the n_outer iterations

    def __post_init__(self):
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lambda and beta must be non-negative")
        if self.n_inner < 1 or self.n_outer < 0:
            raise ValueError("need n_inner >= 1 and n_outer >= 0")
        if self.reg not in REGULARIZERS:
            raise ValueError(f"unknown regulariser {self.reg!r}")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.lr_T <= 0 or self.lr_f <= 0:
            raise ValueError("learning rates must be positive")
        self.t_hidden, self.f_hidden = tuple(self.t_hidden), tuple(self.f_hidden)


def _arrays(data):
    if isinstance(data, tuple):
        k, u = data
    else:
        k, u = data.k, data.u
    return np.asarray(k, dtype=np.float64), np.asarray(u, dtype=np.float64)


class DualTrainer:
    """State of one min-max run: T, f, both optimisers and the batch stream.

    Inputs are (k, u) arrays or datasets in physical units. Fields are
    standardised with the source operator's statistics when one is given
    (or fitted on the source otherwise) unless ``cfg.standardize`` is off.
    """

    def __init__(self, src, tgt, cfg: PottConfig, model=None, seed: int = 0):
        self.cfg, self.model = cfg, model
        ks, us = _arrays(src)
        kt, ut = _arrays(tgt)
        if ks.shape[1:] != kt.shape[1:] or us.shape[1:] != ut.shape[1:]:
            raise ValueError("source and target fields have different shapes")
        if cfg.batch_tgt > len(kt):
            raise ValueError(f"target batch {cfg.batch_tgt} exceeds the {len(kt)} target samples")
        if cfg.batch_src > len(ks):
            raise ValueError(f"source batch {cfg.batch_src} exceeds the {len(ks)} source samples")
        if cfg.reg == "generic" and model is None:
            raise ValueError("the consistency regulariser needs the source operator")
        if model is not None and cfg.standardize:
            scaling = model.stats
        elif cfg.standardize:
            scaling = Standardizer.fit(ks, us)
        else:
            scaling = Standardizer()
        rng = np.random.default_rng(seed)
        self.T = TransportMap(ks.shape[1:], us.shape[1:], rng, cfg.t_hidden, cfg.activation,
                              scaling)
        self.f = DualPotential(self.T.n_k + self.T.n_u, rng, cfg.f_hidden, cfg.activation)
        self.src = self.T.standardize(ks, us)
        self.tgt = self.T.standardize(kt, ut)
        self.opt_T = Adam(self.T.parameters(), lr=cfg.lr_T)
        self.opt_f = Adam(self.f.parameters(), lr=cfg.lr_f)
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        self.trace: list[float] = []
        self.outer = 0

    def lr_scale(self) -> float:
        if self.cfg.schedule == "cosine" and self.cfg.n_outer > 0:
            frac = min(self.outer / self.cfg.n_outer, 1.0)
            return 0.5 * (1.0 + math.cos(math.pi * frac))
        return 1.0

    def _batch(self, data, size):
        idx = self.rng.choice(len(data[0]), size=size, replace=False)
        return data[0][idx], data[1][idx]

    def penalty(self, tk, tu) -> Tensor | None:
        reg = self.cfg.reg
        if reg == "generic":
            return consistency_penalty(self.model, tk, tu)
        if reg == "conservation":
            return conservation_variance(tu, self.T.u_shape)
        return None

    def map_loss(self, zk, zu) -> Tensor:
        """mean[c(x, T x) - f(T x)] + lambda R(T) on one source batch."""
        tk, tu = self.T(Tensor(zk), Tensor(zu))
        loss = ops.reduce_mean(batch_cost(zk, zu, tk, tu) - self.f(tk, tu))
        r = self.penalty(tk, tu)
        if r is not None and self.cfg.lam:
            loss = loss + r * self.cfg.lam
        return loss

    def theta_phase(self, n_steps: int | None = None, scale: float | None = None):
        """Freeze f and take ``n_steps`` (default n_inner) Adam steps on T.

        ``scale`` overrides the scheduled learning-rate multiplier.
        """
        scale = self.lr_scale() if scale is None else scale
        self.f.set_requires_grad(False)
        self.T.set_requires_grad(True)
        frozen = self._freeze_model()
        try:
            for _ in range(n_steps or self.cfg.n_inner):
                loss = self.map_loss(*self._batch(self.src, self.cfg.batch_src))
                backward(loss)
                self.opt_T.step(scale)
        finally:
            self._thaw_model(frozen)
            self.f.set_requires_grad(True)

    def phi_step(self) -> float:
        """Freeze T and take one ascent step on mean_tgt f - mean_src f(T x).

        Returns the min-max objective on the step's batches, measured
        before the update.
        """
        zk, zu = self._batch(self.src, self.cfg.batch_src)
        yk, yu = self._batch(self.tgt, self.cfg.batch_tgt)
        with no_grad():
            tk, tu = self.T(Tensor(zk), Tensor(zu))
            cost = float(np.mean(batch_cost(zk, zu, tk, tu).data))
            reg = self._penalty_value(tk, tu)
        self.T.set_requires_grad(False)
        self.f.set_requires_grad(True)
        try:
            f_src = ops.reduce_mean(self.f(Tensor(tk.data), Tensor(tu.data)))
            f_tgt = ops.reduce_mean(self.f(Tensor(yk), Tensor(yu)))
            value = cost - f_src.item() + f_tgt.item() + self.cfg.lam * reg
            backward(f_src - f_tgt)  # descent on the negated ascent objective
            self.opt_f.step(self.lr_scale())
        finally:
            self.T.set_requires_grad(True)
        return value

    def _penalty_value(self, tk, tu) -> float:
        if self.cfg.reg == "none":
            return 0.0
        with no_grad():
            return self.penalty(tk, tu).item()

    def _freeze_model(self):
        if self.model is None:
            return []
        flags = [p.requires_grad for p in self.model.parameters()]
        self.model.set_requires_grad(False)
        return flags

    def _thaw_model(self, flags):
        if self.model is None:
            return
        for p, flag in zip(self.model.parameters(), flags):
            p.requires_grad = flag

    def objective(self, chunk: int = 256) -> float:
        """Min-max objective over the full source and target sets."""
        zk, zu = self.src
        yk, yu = self.tgt
        cost, f_src, reg, f_tgt = [], [], [], []
        with no_grad():
            for s in range(0, len(zk), chunk):
                bk, bu = zk[s:s + chunk], zu[s:s + chunk]
                tk, tu = self.T(Tensor(bk), Tensor(bu))
                cost.append(batch_cost(bk, bu, tk, tu).data)
                f_src.append(self.f(tk, tu).data)
                if self.cfg.reg != "none":
                    reg.append(self.penalty(tk, tu).item() * len(bk))
            for s in range(0, len(yk), chunk):
                f_tgt.append(self.f(Tensor(yk[s:s + chunk]), Tensor(yu[s:s + chunk])).data)
        value = float(np.mean(np.concatenate(cost)) - np.mean(np.concatenate(f_src))
                      + np.mean(np.concatenate(f_tgt)))
        if reg:
            value += self.cfg.lam * sum(reg) / len(zk)
        return value

    def run(self, n_outer: int | None = None) -> list[float]:
        for it in range(self.cfg.n_outer if n_outer is None else n_outer):
            try:
                self.theta_phase()
                value = self.phi_step()
            except NonFiniteError as e:
                raise TransportDiverged(f"non-finite objective at outer step {it}: {e}",
                                        self.trace) from e
            if not math.isfinite(value):
                raise TransportDiverged(f"non-finite objective at outer step {it}", self.trace)
            self.trace.append(value)
            self.outer += 1
        return self.trace


@dataclass
class DualResult:
    T: TransportMap
    f: DualPotential
    trace: list = field(default_factory=list)
    objective: float = math.nan
    trainer: DualTrainer | None = None


def dual_train(src, tgt, cfg: PottConfig, model=None, seed: int = 0) -> DualResult:
    """Alternate n_inner map steps with one potential step, n_outer times."""
    trainer = DualTrainer(src, tgt, cfg, model, seed)
    trainer.run()
    return DualResult(trainer.T, trainer.f, trainer.trace, trainer.objective(), trainer)


@dataclass
class PushforwardDataset:
    k: np.ndarray
    u: np.ndarray
    source_indices: np.ndarray

    def __len__(self):
        return len(self.k)


def pushforward(T: TransportMap, src, chunk: int = 256) -> PushforwardDataset:
    """Apply T to every source pair; keeps the link to the source index."""
    k, u = _arrays(src)
    if k.shape[1:] != T.k_shape or u.shape[1:] != T.u_shape:
        raise ValueError(f"source fields {k.shape[1:]}/{u.shape[1:]} do not match the map "
                         f"{T.k_shape}/{T.u_shape}")
    ks, us = [], []
    for s in range(0, len(k), chunk):
        a, b = T.transport(k[s:s + chunk], u[s:s + chunk])
        ks.append(a)
        us.append(b)
    idx = getattr(src, "indices", None)
    idx = np.arange(len(k)) if idx is None else np.asarray(idx)
    return PushforwardDataset(np.concatenate(ks), np.concatenate(us), idx)
