"""Relative-error loss and the supervised training loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..diffcore import Adam, NonFiniteError, Tensor, backward, ops
from .models import OperatorModel, Standardizer


class TrainingDiverged(FloatingPointError):
    def __init__(self, msg: str, trace: list):
        super().__init__(msg)
        self.trace = list(trace)


def rmse(pred, gt) -> float:
    """||pred - gt||^2 / ||gt||^2 for one sample (arrays or GridFunctions)."""
    p = np.asarray(getattr(pred, "values", pred), dtype=np.float64)
    g = np.asarray(getattr(gt, "values", gt), dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    return float(per_sample_rmse(p[None], g[None])[0])


def per_sample_rmse(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, gt.ndim))
    den = np.sum(gt**2, axis=axes) if axes else gt**2
    if np.any(den == 0):
        raise ValueError("ground truth with zero norm")
    num = np.sum((pred - gt) ** 2, axis=axes) if axes else (pred - gt) ** 2
    return num / den


def rmse_loss(model: OperatorModel, k: np.ndarray, u: np.ndarray) -> Tensor:
    """Differentiable mean relative squared error of ``model`` on a batch."""
    st = model.stats
    z = model.forward(Tensor(st.k_forward(k)))
    pred = z * st.u_std + st.u_mean
    axes = tuple(range(1, u.ndim))
    den = np.sum(u**2, axis=axes)
    if np.any(den == 0):
        raise ValueError("ground truth with zero norm")
    num = ops.reduce_sum(ops.square(pred - u), axis=axes)
    return ops.reduce_mean(num / den)


def evaluate(model: OperatorModel, k: np.ndarray, u: np.ndarray, batch: int = 200) -> float:
    """Dataset rMSE (mean over samples)."""
    errs = []
    for s in range(0, len(k), batch):
        errs.append(per_sample_rmse(model.predict_array(k[s:s + batch]), u[s:s + batch]))
    return float(np.concatenate(errs).mean())


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 20
    lr: float = 1e-3
    schedule: str = "constant"  # or "cosine"
    backbone_divisor: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.backbone_divisor < 1:
            raise ValueError("backbone divisor must be >= 1")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch size >= 1")


@dataclass
class TrainResult:
    model: OperatorModel
    trace: list = field(default_factory=list)       # mean training loss per epoch
    val_trace: list = field(default_factory=list)   # validation rMSE per epoch
    best_epoch: int = -1
    best_val: float = math.inf
    step_losses: list = field(default_factory=list)


def lr_scale(cfg: TrainConfig, step: int, total: int) -> float:
    if cfg.schedule == "cosine" and total > 0:
        return 0.5 * (1.0 + math.cos(math.pi * step / total))
    return 1.0


def make_optimizer(model: OperatorModel, cfg: TrainConfig, finetune: bool) -> Adam:
    if not finetune:
        return Adam(model.parameters(), lr=cfg.lr)
    heads = set(model.head_names())
    named = model.named_parameters()
    return Adam([
        {"params": [p for n, p in named if n not in heads], "lr": cfg.lr / cfg.backbone_divisor},
        {"params": [p for n, p in named if n in heads], "lr": cfg.lr},
    ])


def concat_data(*sets):
    """Stack the (k, u) arrays of several datasets, e.g. source plus target."""
    return (np.concatenate([d.k for d in sets]), np.concatenate([d.u for d in sets]))


def _arrays(data):
    if isinstance(data, tuple):
        return data
    return data.k, data.u


class BatchLoop:
    """Shared epoch bookkeeping: shuffling, lr schedule, validation selection.

    ``step_loss(batch_idx)`` returns the scalar loss Tensor for one step.
    """

    def __init__(self, model, cfg: TrainConfig, n: int, val, finetune: bool):
        self.model, self.cfg, self.n = model, cfg, n
        self.val = None if val is None else _arrays(val)
        self.opt = make_optimizer(model, cfg, finetune)
        self.rng = np.random.default_rng(cfg.seed)
        self.steps_per_epoch = math.ceil(n / cfg.batch_size)
        self.total = self.steps_per_epoch * cfg.epochs

    def run(self, step_loss) -> TrainResult:
        cfg, model = self.cfg, self.model
        res = TrainResult(model)
        best_state = None
        step = 0
        for epoch in range(cfg.epochs):
            order = self.rng.permutation(self.n)
            total = 0.0
            for s in range(0, self.n, cfg.batch_size):
                idx = order[s:s + cfg.batch_size]
                try:
                    loss = step_loss(idx)
                    value = loss.item()
                    backward(loss)
                    self.opt.step(lr_scale(cfg, step, self.total))
                except NonFiniteError as e:
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}: {e}",
                                           res.trace) from e
                res.step_losses.append(value)
                total += value * len(idx)
                step += 1
            res.trace.append(total / self.n)
            if not math.isfinite(res.trace[-1]):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", res.trace)
            if self.val is not None:
                v = evaluate(model, *self.val)
                res.val_trace.append(v)
                if v < res.best_val:
                    res.best_val, res.best_epoch = v, epoch
                    best_state = model.state_dict()
        if best_state is not None:
            model.load_state_dict(best_state)
        else:
            res.best_epoch = cfg.epochs - 1
        model.zero_grad()
        return res


def train_supervised(model: OperatorModel, data, cfg: TrainConfig, val=None,
                     finetune: bool = False) -> TrainResult:
    """Minimise batch-mean rMSE with Adam over shuffled mini-batches.

    ``data`` and ``val`` are datasets (anything with ``k``/``u`` arrays) or
    (k, u) tuples. Fresh models get standardisation statistics from
    ``data``; with ``finetune`` the model's existing statistics are kept and
    every layer except the two output layers trains at lr / divisor. When
    ``val`` is given the parameters from the epoch of lowest validation rMSE
    are restored at the end.
    """
    k, u = _arrays(data)
    if len(k) == 0:
        raise ValueError("training data is empty")
    if not finetune:
        model.stats = Standardizer.fit(k, u)
    loop = BatchLoop(model, cfg, len(k), val, finetune)
    return loop.run(lambda idx: rmse_loss(model, k[idx], u[idx]))


def finetune(model: OperatorModel, target, cfg: TrainConfig, val=None) -> TrainResult:
    return train_supervised(model, target, cfg, val, finetune=True)

