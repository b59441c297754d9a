"""Binary tensor records, model checkpoints and dataset directories.

Tensor record layout (all integers u32 little-endian)::

    "POTT" | version | record type | rank | dims[rank] | f64 LE payload, row-major

A checkpoint is a record of type 2 whose rank field holds the number of
parameter tensors. It continues with a length-prefixed UTF-8 tag, a
length-prefixed JSON header and the parameters as consecutive type-1
records in the order listed by the header's ``params`` entry.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from ..neural_ops.models import OperatorModel, build_model
from ..pde_data.domains import SPLITS, Dataset, DomainSpec

MAGIC = b"POTT"
VERSION = 1
TENSOR, CHECKPOINT = 1, 2
HEADER = struct.Struct("<4sIII")
U32 = struct.Struct("<I")
MANIFEST = "manifest.json"


class FormatError(ValueError):
    pass


class BadMagic(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class TruncatedPayload(FormatError):
    pass


class SplitOverlap(FormatError):
    pass


# ---------------------------------------------------------------- tensors

def encode_tensor(a: np.ndarray) -> bytes:
    a = np.asarray(a, dtype=np.float64)
    head = HEADER.pack(MAGIC, VERSION, TENSOR, a.ndim)
    dims = struct.pack(f"<{a.ndim}I", *a.shape)
    return head + dims + np.ascontiguousarray(a).astype("<f8").tobytes()


def _read_header(buf: bytes, pos: int, what: str):
    if len(buf) - pos < HEADER.size:
        raise TruncatedPayload(f"{what}: truncated payload (header needs {HEADER.size} bytes, "
                               f"{len(buf) - pos} left)")
    magic, version, rtype, rank = HEADER.unpack_from(buf, pos)
    if magic != MAGIC:
        raise BadMagic(f"{what}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatch(f"{what}: version mismatch, file has {version}, "
                              f"reader supports {VERSION}")
    return rtype, rank, pos + HEADER.size


def _read_tensor_body(buf: bytes, pos: int, rank: int, what: str):
    if len(buf) - pos < 4 * rank:
        raise TruncatedPayload(f"{what}: truncated payload in the dimension list")
    dims = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    nbytes = 8 * int(np.prod(dims, dtype=np.int64))
    if len(buf) - pos < nbytes:
        raise TruncatedPayload(f"{what}: truncated payload, expected {nbytes} bytes, "
                               f"found {len(buf) - pos}")
    a = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=pos).reshape(dims)
    return a.astype(np.float64), pos + nbytes


def decode_tensor(buf: bytes, what: str = "tensor") -> np.ndarray:
    rtype, rank, pos = _read_header(buf, 0, what)
    if rtype != TENSOR:
        raise FormatError(f"{what}: record type {rtype} is not a tensor")
    a, pos = _read_tensor_body(buf, pos, rank, what)
    if pos != len(buf):
        raise FormatError(f"{what}: {len(buf) - pos} trailing bytes")
    return a


def _atomic_write(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_tensor(path, a: np.ndarray):
    _atomic_write(Path(path), encode_tensor(a))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    return decode_tensor(path.read_bytes(), str(path))


# ---------------------------------------------------------------- checkpoints

def _prefixed(b: bytes) -> bytes:
    return U32.pack(len(b)) + b


def _read_prefixed(buf: bytes, pos: int, what: str):
    if len(buf) - pos < 4:
        raise TruncatedPayload(f"{what}: truncated payload in the checkpoint header")
    (n,) = U32.unpack_from(buf, pos)
    pos += 4
    if len(buf) - pos < n:
        raise TruncatedPayload(f"{what}: truncated payload in the checkpoint header")
    return buf[pos:pos + n], pos + n


def encode_checkpoint(model: OperatorModel, extra: dict | None = None) -> bytes:
    named = model.named_parameters()
    header = {"config": model.config(), "params": [n for n, _ in named], "extra": extra or {}}
    out = [HEADER.pack(MAGIC, VERSION, CHECKPOINT, len(named)),
           _prefixed(model.arch.encode()),
           _prefixed(json.dumps(header, sort_keys=True).encode())]
    out += [encode_tensor(p.data) for _, p in named]
    return b"".join(out)


def decode_checkpoint(buf: bytes, what: str = "checkpoint"):
    """Returns (tag, header dict, {name: array}) in the stored order."""
    rtype, count, pos = _read_header(buf, 0, what)
    if rtype != CHECKPOINT:
        raise FormatError(f"{what}: record type {rtype} is not a checkpoint")
    tag, pos = _read_prefixed(buf, pos, what)
    raw, pos = _read_prefixed(buf, pos, what)
    try:
        header = json.loads(raw)
    except json.JSONDecodeError as e:
        raise FormatError(f"{what}: malformed checkpoint header: {e}") from e
    names = header.get("params", [])
    if len(names) != count:
        raise FormatError(f"{what}: header lists {len(names)} tensors, record has {count}")
    params = {}
    for name in names:
        rtype, rank, pos = _read_header(buf, pos, f"{what}[{name}]")
        if rtype != TENSOR:
            raise FormatError(f"{what}[{name}]: record type {rtype} is not a tensor")
        params[name], pos = _read_tensor_body(buf, pos, rank, f"{what}[{name}]")
    if pos != len(buf):
        raise FormatError(f"{what}: {len(buf) - pos} trailing bytes")
    return tag.decode(), header, params


def save_checkpoint(path, model: OperatorModel, extra: dict | None = None):
    _atomic_write(Path(path), encode_checkpoint(model, extra))


def load_checkpoint(path) -> OperatorModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    tag, header, params = decode_checkpoint(path.read_bytes(), str(path))
    model = build_model(header["config"], rng=0)
    if model.arch != tag:
        raise FormatError(f"{path}: tag {tag!r} does not match architecture {model.arch!r}")
    model.load_state_dict(params)
    return model


def checkpoint_extra(path) -> dict:
    _, header, _ = decode_checkpoint(Path(path).read_bytes(), str(path))
    return header.get("extra", {})


# ---------------------------------------------------------------- datasets

def global_ids(spec: DomainSpec, split: str, local: np.ndarray) -> np.ndarray:
    """Domain-wide sample ids: train, then val, then test."""
    offset = 0
    for s in SPLITS:
        if s == split:
            return offset + np.asarray(local, dtype=np.int64)
        offset += spec.split_size(s)
    raise ValueError(f"unknown split {split!r}")


def check_split_hygiene(assignment: dict):
    seen: dict[int, str] = {}
    for split, ids in assignment.items():
        for i in ids:
            if i in seen:
                raise SplitOverlap(f"sample {i} appears in both {seen[i]} and {split}")
            seen[int(i)] = split


def write_dataset(root, splits: dict[str, Dataset], extra: dict | None = None):
    """One tensor file per field per sample plus a JSON manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    spec = next(iter(splits.values())).spec
    manifest = {"format": "pott-dataset", "version": VERSION, "spec": spec.to_dict(),
                "splits": {}, "extra": extra or {}}
    for split, data in splits.items():
        (root / split).mkdir(exist_ok=True)
        ids = global_ids(spec, split, data.indices)
        files = []
        for j, gid in enumerate(ids):
            kf, uf = f"{split}/k_{gid:06d}.pott", f"{split}/u_{gid:06d}.pott"
            write_tensor(root / kf, data.k[j])
            write_tensor(root / uf, data.u[j])
            files.append({"id": int(gid), "k": kf, "u": uf})
        manifest["splits"][split] = {"local": [int(i) for i in data.indices], "samples": files}
    check_split_hygiene({s: [f["id"] for f in v["samples"]]
                         for s, v in manifest["splits"].items()})
    _atomic_write(root / MANIFEST, json.dumps(manifest, indent=1, sort_keys=True).encode())


def read_manifest(root) -> dict:
    path = Path(root) / MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: malformed manifest: {e}") from e
    for key in ("format", "spec", "splits"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest lacks {key!r}")
    if manifest["format"] != "pott-dataset":
        raise FormatError(f"{path}: not a dataset manifest")
    if manifest.get("version") != VERSION:
        raise VersionMismatch(f"{path}: version mismatch, manifest has "
                              f"{manifest.get('version')}, reader supports {VERSION}")
    check_split_hygiene({s: [f["id"] for f in v["samples"]]
                         for s, v in manifest["splits"].items()})
    return manifest


def read_dataset(root, splits=None) -> dict[str, Dataset]:
    root = Path(root)
    manifest = read_manifest(root)
    spec = DomainSpec.from_dict(manifest["spec"])
    out = {}
    for split, entry in manifest["splits"].items():
        if splits is not None and split not in splits:
            continue
        samples = entry["samples"]
        if not samples:
            raise FormatError(f"{root}: split {split} is empty")
        k = np.stack([read_tensor(root / s["k"]) for s in samples])
        u = np.stack([read_tensor(root / s["u"]) for s in samples])
        out[split] = Dataset(spec, split, k, u, np.asarray(entry["local"], dtype=np.int64))
    if splits is not None:
        missing = set(splits) - set(out)
        if missing:
            raise FormatError(f"{root}: missing splits {sorted(missing)}")
    return out


def write_pushforward(root, pf, spec: DomainSpec):
    """Stores transported pairs as a train split linked to source indices."""
    data = Dataset(spec, "train", pf.k, pf.u, np.asarray(pf.source_indices))
    write_dataset(root, {"train": data}, extra={"kind": "pushforward"})
