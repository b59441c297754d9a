"""Persistence, experiment orchestration, reports and the command line."""

from .config import (ConfigError, ExperimentConfig, ResultRecord, append_record,
                     load_records)
from .experiment import run_experiment, run_method
from .io import (BadMagic, FormatError, SplitOverlap, TruncatedPayload, VersionMismatch,
                 decode_checkpoint, decode_tensor, encode_checkpoint, encode_tensor,
                 load_checkpoint, read_dataset, read_tensor, save_checkpoint, write_dataset,
                 write_pushforward, write_tensor)
from .provenance import code_version, read_provenance, write_provenance
from .report import EmptyRunSet, aggregate, render_svg, write_csv, write_prediction_svg

__all__ = [
    "BadMagic", "ConfigError", "EmptyRunSet", "ExperimentConfig", "FormatError",
    "ResultRecord", "SplitOverlap", "TruncatedPayload", "VersionMismatch", "aggregate",
    "append_record", "code_version", "decode_checkpoint", "decode_tensor", "encode_checkpoint",
    "encode_tensor", "load_checkpoint", "load_records", "read_dataset", "read_provenance",
    "read_tensor", "render_svg", "run_experiment", "run_method", "save_checkpoint",
    "write_csv", "write_dataset", "write_prediction_svg", "write_provenance",
    "write_pushforward", "write_tensor",
]
