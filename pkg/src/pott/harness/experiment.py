"""Transfer experiments: pott, finetuning and source+target training."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..neural_ops.models import OperatorModel, build_model, clone_model
from ..neural_ops.training import (TrainConfig, concat_data, evaluate, finetune,
                                   train_supervised)
from ..transport.dual import dual_train, pushforward
from ..transport.transfer import transfer_train
from .config import ConfigError, ExperimentConfig, ResultRecord, append_record
from .io import load_checkpoint, read_dataset, save_checkpoint, write_pushforward
from .provenance import write_provenance


def max_workers() -> int:
    raw = os.environ.get("POTT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"POTT_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("POTT_THREADS must be >= 1")
    return n


def target_splits(tgt: dict, n_target: int):
    for split in ("train", "val", "test"):
        if split not in tgt:
            raise ConfigError(f"target data lacks a {split} split")
    if len(tgt["train"]) < n_target:
        raise ConfigError(f"target train split has {len(tgt['train'])} samples, "
                          f"{n_target} requested")
    return tgt["train"].subset(n_target), tgt["val"], tgt["test"]


def run_method(cfg: ExperimentConfig, seed: int, src_train, tgt: dict,
               source_model: OperatorModel):
    """One seed of one method. Returns (record, trained model, pushforward or None)."""
    t0 = time.perf_counter()
    tgt_train, val, test = target_splits(tgt, cfg.n_target)
    tcfg = cfg.train_config(seed)
    pf, dual_trace = None, []
    if cfg.method == "finetune":
        model = clone_model(source_model)
        res = finetune(model, tgt_train, tcfg, val)
    elif cfg.method == "srctgt":
        arch = dict(source_model.config())
        arch.pop("stats", None)
        model = build_model(arch, rng=np.random.default_rng(seed))
        res = train_supervised(model, concat_data(src_train, tgt_train), tcfg, val)
    else:
        pc = cfg.pott_config()
        dual = dual_train(src_train, tgt_train, pc, model=source_model, seed=seed)
        dual_trace = dual.trace
        pf = pushforward(dual.T, src_train)
        model = clone_model(source_model)
        tcfg = TrainConfig(**{**tcfg.__dict__, "epochs": pc.transfer_epochs})
        res = transfer_train(model, tgt_train, pf, tcfg, pc.beta, val)
    rec = ResultRecord(config_hash=cfg.hash(), task=cfg.task(), method=cfg.method,
                       n_target=cfg.n_target, seed=seed, test_rmse=evaluate(model, test.k, test.u),
                       train_trace=res.trace, val_trace=res.val_trace, dual_trace=dual_trace,
                       wall_time=time.perf_counter() - t0)
    return rec, model, pf


def _run_seed(args):
    cfg, seed, src_dir, tgt_dir, ckpt, out = args
    src = read_dataset(src_dir, ["train"])["train"]
    tgt = read_dataset(tgt_dir)
    model = load_checkpoint(ckpt)
    rec, trained, pf = run_method(cfg, seed, src, tgt, model)
    save_checkpoint(Path(out) / f"model_seed{seed}.pott", trained,
                    extra={"method": cfg.method, "seed": seed, "task": cfg.task()})
    if pf is not None:
        write_pushforward(Path(out) / f"pushforward_seed{seed}", pf, src.spec)
    return rec


def run_experiment(cfg: ExperimentConfig, src_dir, tgt_dir, ckpt, out_dir=None) -> list:
    """Run every seed, write checkpoints, records and a provenance stamp."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_provenance(out, {"experiment": cfg.to_dict(), "resolved_pott": cfg.pott_config().__dict__},
                     {"source": src_dir, "target": tgt_dir, "checkpoint": ckpt})
    jobs = [(cfg, s, str(src_dir), str(tgt_dir), str(ckpt), str(out)) for s in cfg.seeds]
    workers = min(max_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            recs = list(pool.map(_run_seed, jobs))
    else:
        recs = [_run_seed(j) for j in jobs]
    for rec in recs:
        append_record(out, rec)
    return recs
