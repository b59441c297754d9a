"""Experiment configuration and result records."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..neural_ops.training import TrainConfig
from ..pde_data.domains import EQUATIONS, SUBDOMAINS
from ..transport.dual import PottConfig

METHODS = ("pott", "finetune", "srctgt")
N_TARGET = (50, 100)


class ConfigError(ValueError):
    pass


def _check_overrides(overrides: dict, cls, what: str):
    names = {f.name for f in fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise ConfigError(f"unknown {what} option(s): {sorted(unknown)}")


@dataclass
class ExperimentConfig:
    equation: str = "burgers"
    source: str = "D1"
    target: str = "D2"
    n_target: int = 50
    method: str = "pott"
    pott: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    out_dir: str = "runs"
    allow_custom_n_target: bool = False  # reduced-size runs outside {50, 100}

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise ConfigError(f"unknown equation {self.equation!r}")
        for sub in (self.source, self.target):
            if sub not in SUBDOMAINS:
                raise ConfigError(f"unknown subdomain {sub!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not isinstance(self.n_target, int) or self.n_target < 1:
            raise ConfigError("n_target must be a positive integer")
        if self.n_target not in N_TARGET and not self.allow_custom_n_target:
            raise ConfigError(f"n_target must be one of {N_TARGET}")
        if not self.seeds or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of non-negative integers")
        _check_overrides(self.pott, PottConfig, "pott")
        _check_overrides(self.train, TrainConfig, "train")
        try:
            self.pott_config()
            self.train_config(0)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def pott_config(self) -> PottConfig:
        return PottConfig(**self.pott)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(**{**self.train, "seed": seed})

    def task(self) -> str:
        return f"{self.equation}:{self.source}->{self.target}"

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("seeds")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        _check_overrides(d, cls, "experiment")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config {path} does not exist")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: malformed JSON: {e}") from e
        return cls.from_dict(d)


@dataclass
class ResultRecord:
    config_hash: str
    task: str
    method: str
    n_target: int
    seed: int
    test_rmse: float
    train_trace: list = field(default_factory=list)
    val_trace: list = field(default_factory=list)
    dual_trace: list = field(default_factory=list)
    wall_time: float = 0.0

    def __post_init__(self):
        if not self.test_rmse >= 0:
            raise ValueError(f"test rMSE must be non-negative, got {self.test_rmse}")

    def to_dict(self) -> dict:
        return asdict(self)


RECORDS = "records.jsonl"


def append_record(run_dir, rec: ResultRecord):
    """Records are only ever appended, one JSON object per line."""
    path = Path(run_dir) / RECORDS
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def load_records(runs_dir) -> list[ResultRecord]:
    """All records in ``runs_dir`` and its subdirectories."""
    root = Path(runs_dir)
    if not root.exists():
        raise FileNotFoundError(f"runs directory {root} does not exist")
    recs = []
    for path in sorted(root.rglob(RECORDS)):
        for n, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                recs.append(ResultRecord(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as e:
                raise ConfigError(f"{path}:{n}: malformed record: {e}") from e
    return recs
