#!/usr/bin/env python3
"""Standalone reader for POTT tensor files; needs only the standard library.

Usage: decode_pott.py FILE  prints {"dims": [...], "values": [...]} as JSON,
with values flattened in row-major order. Checkpoints print their tag, header
and every parameter tensor.
"""

import json
import struct
import sys


def tensor(buf, pos):
    magic, version, rtype, rank = struct.unpack_from("<4sIII", buf, pos)
    if magic != b"POTT":
        raise SystemExit(f"bad magic {magic!r}")
    if version != 1:
        raise SystemExit(f"unsupported version {version}")
    pos += 16
    if rtype != 1:
        return rtype, rank, None, None, pos
    dims = list(struct.unpack_from(f"<{rank}I", buf, pos))
    pos += 4 * rank
    count = 1
    for d in dims:
        count *= d
    if len(buf) - pos < 8 * count:
        raise SystemExit("truncated payload")
    values = list(struct.unpack_from(f"<{count}d", buf, pos))
    return rtype, rank, dims, values, pos + 8 * count


def prefixed(buf, pos):
    (n,) = struct.unpack_from("<I", buf, pos)
    return buf[pos + 4:pos + 4 + n], pos + 4 + n


def decode(buf):
    rtype, rank, dims, values, pos = tensor(buf, 0)
    if rtype == 1:
        return {"dims": dims, "values": values}
    if rtype != 2:
        raise SystemExit(f"unknown record type {rtype}")
    tag, pos = prefixed(buf, pos)
    header, pos = prefixed(buf, pos)
    header = json.loads(header)
    params = {}
    for name in header["params"]:
        _, _, dims, values, pos = tensor(buf, pos)
        params[name] = {"dims": dims, "values": values}
    return {"tag": tag.decode(), "header": header, "params": params}


if __name__ == "__main__":
    if len(sys.argv) != 2:
        raise SystemExit(__doc__)
    with open(sys.argv[1], "rb") as fh:
        print(json.dumps(decode(fh.read())))
