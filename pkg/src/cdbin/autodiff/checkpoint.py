"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic b"CDBCKPT\\0"
    offset 8   u32       format version (currently 1)
    offset 12  u64       manifest length L in bytes
    offset 20  L bytes   UTF-8 JSON manifest
    then       raw little-endian array payloads, back to back

The manifest is ``{"metadata": {...}, "arrays": [{"name", "shape", "dtype",
"offset", "nbytes"}, ...]}`` where ``offset`` counts from the first payload
byte and ``dtype`` is "float32", "float64" or "int64". Parameter arrays are
named ``param/<net>/<layer>``, optimizer moments ``adam/<net>/m/<layer>`` and
``adam/<net>/v/<layer>``, batch-norm statistics ``bn/<net>/<layer>/mean|var``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CDBCKPT\x00"
VERSION = 1
_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


class CheckpointError(Exception):
    pass


def save_arrays(path, arrays: dict[str, np.ndarray], metadata: dict | None = None):
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dtype = str(arr.dtype)
        if dtype not in _DTYPES:
            raise CheckpointError(f"{name}: unsupported dtype {dtype}")
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dtype,
                        "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    manifest = json.dumps({"metadata": metadata or {}, "arrays": entries}, sort_keys=True).encode()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(manifest)))
        f.write(manifest)
        for c in chunks:
            f.write(c)
    tmp.replace(path)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, mlen = struct.unpack("<IQ", data[8:20])
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version}, expected {VERSION}")
    manifest = json.loads(data[20:20 + mlen])
    base = 20 + mlen
    arrays = {}
    for e in manifest["arrays"]:
        start = base + e["offset"]
        raw = data[start:start + e["nbytes"]]
        if len(raw) != e["nbytes"]:
            raise CheckpointError(f"{path}: payload for {e['name']} is truncated")
        arrays[e["name"]] = np.frombuffer(raw, dtype=_DTYPES[e["dtype"]]).astype(e["dtype"]).reshape(e["shape"])
    return arrays, manifest["metadata"]
