"""Provenance stamps written next to every artifact."""

from __future__ import annotations

import hashlib
import json
import platform
import subprocess
import sys
from pathlib import Path

import numpy as np
import scipy

from .. import __version__

PROVENANCE = "provenance.json"


def code_version() -> dict:
    here = Path(__file__).resolve().parent
    commit = "unknown"
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=here, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0:
            commit = out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return {"package": __version__, "commit": commit, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_provenance(out_dir, config: dict, inputs: dict | None = None) -> Path:
    """Resolved config, input digests and code version for regeneration."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {"config": config, "code": code_version(), "argv": list(sys.argv),
             "inputs": {}}
    for name, path in (inputs or {}).items():
        p = Path(path)
        target = p / "manifest.json" if p.is_dir() else p
        stamp["inputs"][name] = {"path": str(p.resolve()),
                                 "sha256": file_digest(target) if target.is_file() else None}
    path = out / PROVENANCE
    path.write_text(json.dumps(stamp, indent=1, sort_keys=True))
    return path


def read_provenance(out_dir) -> dict:
    path = Path(out_dir) / PROVENANCE
    if not path.is_file():
        raise FileNotFoundError(f"no provenance stamp at {path}")
    return json.loads(path.read_text())
