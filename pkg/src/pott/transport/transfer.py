"""Target training with replayed pushforward pairs."""

from __future__ import annotations

import numpy as np

from ..neural_ops.models import OperatorModel
from ..neural_ops.training import BatchLoop, TrainConfig, TrainResult, rmse_loss


def transfer_train(model: OperatorModel, tgt, replay, cfg: TrainConfig, beta: float,
                   val=None) -> TrainResult:
    """Finetune on ``tgt`` with loss mean_tgt rMSE + beta * mean_replay rMSE.

    Each epoch is one shuffled pass over the target split. Every target
    batch is paired with an equally sized replay batch drawn from a
    separate stream, so the target batch order is exactly the one
    finetuning would use with the same seed. The replay term is always
    evaluated; with beta = 0 it contributes exact zeros. Per-step target
    and replay losses are kept on the result as ``target_losses`` and
    ``replay_losses``.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    kt, ut = (tgt if isinstance(tgt, tuple) else (tgt.k, tgt.u))
    if len(kt) == 0:
        raise ValueError("target split is empty")
    kr, ur = (replay if isinstance(replay, tuple) else (replay.k, replay.u))
    if len(kr) == 0:
        raise ValueError("replay set is empty")
    replay_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    tgt_losses, rep_losses = [], []

    def step_loss(idx):
        ridx = replay_rng.choice(len(kr), size=min(len(idx), len(kr)), replace=False)
        lt = rmse_loss(model, kt[idx], ut[idx])
        lr = rmse_loss(model, kr[ridx], ur[ridx])
        tgt_losses.append(lt.item())
        rep_losses.append(lr.item())
        return lt + lr * beta

    loop = BatchLoop(model, cfg, len(kt), val, finetune=True)
    res = loop.run(step_loss)
    res.target_losses = tgt_losses
    res.replay_losses = rep_losses
    return res
