"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic        8 bytes   b"DSEGCKPT"
    version      uint32    currently 1
    header_len   uint32
    header       UTF-8 JSON, keys sorted (config echo, training state)
    n_blocks     uint32
    n_blocks x:
        name_len uint16, name (UTF-8)
        ndim     uint8, dims uint32 x ndim
        values   float64 x prod(dims), row-major

Blocks are written in the order given, so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"DSEGCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def write_checkpoint(path: str | Path, header: dict, blocks: Mapping[str, np.ndarray]) -> None:
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(head)), head, struct.pack("<I", len(blocks))]
    for name, arr in blocks.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        bname = name.encode("utf-8")
        parts.append(struct.pack("<H", len(bname)) + bname)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"{path}: truncated at byte {pos} (wanted {n} more)")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(8) != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    version, head_len = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    header = json.loads(take(head_len).decode("utf-8"))
    (n_blocks,) = struct.unpack("<I", take(4))
    blocks: dict[str, np.ndarray] = {}
    for _ in range(n_blocks):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        count = int(np.prod(shape, dtype=np.int64))
        blocks[name] = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape).copy()
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return header, blocks
