"""Command line entry point: gen, pretrain, transfer, eval, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..neural_ops.models import DeepONet, FNO1d, default_model
from ..neural_ops.training import TrainConfig, evaluate, train_supervised
from ..pde_data.domains import DomainSpec, generate_domain
from .config import ConfigError, ExperimentConfig, load_records
from .experiment import run_experiment
from .io import (FormatError, load_checkpoint, read_dataset, read_manifest, save_checkpoint,
                 write_dataset)
from .provenance import code_version, read_provenance, write_provenance
from .report import EmptyRunSet, write_csv, write_prediction_svg

MODEL_TAGS = ("default", "fno", "deeponet")


def load_spec(path) -> DomainSpec:
    """A full DomainSpec dict, or {"equation", "subdomain", ...overrides} for a preset."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"spec file {path} does not exist")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON: {e}") from e
    if not isinstance(d, dict) or "equation" not in d or "subdomain" not in d:
        raise ConfigError(f"{path}: spec needs 'equation' and 'subdomain'")
    if "params" in d:
        return DomainSpec.from_dict(d)
    d = dict(d)
    if "grid" in d:
        d["grid"] = tuple(d["grid"])
    return DomainSpec.preset(d.pop("equation"), d.pop("subdomain"), **d)


def make_model(tag: str, data, rng):
    eq = data.spec.equation
    k_shape, u_shape = data.k.shape[1:], data.u.shape[1:]
    if tag == "default":
        return default_model(eq, k_shape, u_shape, rng)
    if tag == "fno":
        if len(k_shape) != 1 or k_shape != u_shape:
            raise ConfigError("the fno model needs 1-d inputs and outputs on one grid")
        return FNO1d(k_shape[0], rng)
    if eq == "burgers":
        return DeepONet(k_shape, [np.arange(u_shape[0]) / u_shape[0]], rng)
    return default_model(eq, k_shape, u_shape, rng)


def cmd_gen(a):
    spec = load_spec(a.spec)
    splits = generate_domain(spec)
    write_dataset(a.out, splits)
    write_provenance(a.out, {"spec": spec.to_dict()}, {"spec_file": a.spec})
    print(" ".join(f"{s}={len(d)}" for s, d in splits.items()))


def cmd_pretrain(a):
    data = read_dataset(a.data)
    rng = np.random.default_rng(a.seed)
    model = make_model(a.model, data["train"], rng)
    cfg = TrainConfig(epochs=a.epochs, batch_size=a.batch_size, lr=a.lr, schedule=a.schedule,
                      seed=a.seed)
    res = train_supervised(model, data["train"], cfg, data.get("val"))
    save_checkpoint(a.out, model, extra={"data": str(Path(a.data).resolve()), "seed": a.seed,
                                          "model": a.model, "train": cfg.__dict__,
                                          "code": code_version()})
    if "test" in data:
        print(repr(evaluate(model, data["test"].k, data["test"].u)))
    else:
        print(repr(res.trace[-1] if res.trace else float("nan")))


def cmd_transfer(a):
    cfg = ExperimentConfig.load(a.config)
    cfg.method = a.method
    cfg = ExperimentConfig.from_dict(cfg.to_dict())
    for path in (a.src, a.tgt):
        read_manifest(path)
    if not Path(a.ckpt).is_file():
        raise FileNotFoundError(f"checkpoint {a.ckpt} does not exist")
    recs = run_experiment(cfg, a.src, a.tgt, a.ckpt, a.out)
    for r in recs:
        print(f"seed {r.seed} {r.method} test_rmse {r.test_rmse!r}")


def cmd_eval(a):
    model = load_checkpoint(a.ckpt)
    data = read_dataset(a.data, [a.split])[a.split]
    print(repr(evaluate(model, data.k, data.u)))


def cmd_report(a):
    out = Path(a.out)
    if out.suffix == ".csv":
        write_csv(out, load_records(a.runs))
    elif out.suffix == ".svg":
        recs = load_records(a.runs)
        if not recs:
            raise EmptyRunSet("no run records to report")
        run_dir = next(p.parent for p in sorted(Path(a.runs).rglob("records.jsonl")))
        rec = recs[0]
        model = load_checkpoint(run_dir / f"model_seed{rec.seed}.pott")
        tgt_dir = read_provenance(run_dir)["inputs"]["target"]["path"]
        test = read_dataset(tgt_dir, ["test"])["test"]
        i = a.sample
        if not 0 <= i < len(test):
            raise ConfigError(f"sample {i} outside the {len(test)} test samples")
        pred = model.predict_array(test.k[i:i + 1])[0]
        write_prediction_svg(out, test.k[i], test.u[i], pred,
                             f"{rec.task} {rec.method} seed {rec.seed} test sample {i}")
    else:
        raise ConfigError(f"report output must end in .csv or .svg, got {out.name}")
    print(out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pott", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a domain dataset from a spec file")
    g.add_argument("--spec", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("pretrain", help="train a source operator")
    t.add_argument("--data", required=True)
    t.add_argument("--model", default="default", choices=MODEL_TAGS)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--batch-size", type=int, default=20)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--schedule", default="constant", choices=("constant", "cosine"))
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_pretrain)

    x = sub.add_parser("transfer", help="adapt a source operator to a target domain")
    x.add_argument("--method", required=True, choices=("pott", "finetune", "srctgt"))
    x.add_argument("--src", required=True)
    x.add_argument("--tgt", required=True)
    x.add_argument("--ckpt", required=True)
    x.add_argument("--config", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_transfer)

    e = sub.add_parser("eval", help="test rMSE of a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test", choices=("train", "val", "test"))
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="aggregate runs to CSV or draw a prediction SVG")
    r.add_argument("--runs", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--sample", type=int, default=0)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except (FormatError, ConfigError, FileNotFoundError, ValueError, KeyError,
            FloatingPointError) as e:
        print(f"pott {args.command}: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
