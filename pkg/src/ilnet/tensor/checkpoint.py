"""Binary checkpoint format.

Layout: the magic ``ILNET1`` followed by one record per entry, sorted by name::

    u32 name_len | name bytes (utf-8) | u32 rank | u32 dims[rank] | f32 payload

All integers and floats are little-endian.
"""

from __future__ import annotations

import os
import struct
from typing import Dict

import numpy as np

MAGIC = b"ILNET1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, state: Dict[str, np.ndarray]) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        for name in sorted(state):
            arr = np.asarray(state[name])
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: not an ILNET1 checkpoint")
    pos = len(MAGIC)
    state: Dict[str, np.ndarray] = {}

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError(f"{path}: truncated checkpoint")
        chunk = blob[pos : pos + n]
        pos += n
        return chunk

    while pos < len(blob):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(take(4 * count), dtype="<f4").astype(np.float32).reshape(dims)
        state[name] = arr
    return state
