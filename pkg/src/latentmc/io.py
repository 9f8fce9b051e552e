"""Versioned binary checkpoint container.

Layout: 8-byte magic, 8-byte little-endian header length, UTF-8 JSON header,
then raw little-endian float64 array bytes in header order. The writer is
fully deterministic (sorted keys, no timestamps), so identical state produces
byte-identical files. Writes go through a temp file plus rename.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .errors import CheckpointError

__all__ = ["save_container", "load_container"]

_MAGIC = b"LMCCKPT1"


def save_container(path: str, meta: dict, arrays: dict) -> None:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype=np.float64)
        raw = a.tobytes()
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta, "entries": entries}, sort_keys=True).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for raw in blobs:
            f.write(raw)
    os.replace(tmp, path)


def load_container(path: str) -> tuple:
    """Returns (meta, arrays). Raises CheckpointError on any malformation."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint '{path}': {e}") from e
    if len(blob) < 16 or blob[:8] != _MAGIC:
        raise CheckpointError(f"'{path}' is not a latentmc checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + hlen:
        raise CheckpointError(f"'{path}' is truncated (header)")
    try:
        header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
        meta = header["meta"]
        entries = header["entries"]
    except (ValueError, KeyError) as e:
        raise CheckpointError(f"'{path}' has a corrupt header: {e}") from e
    base = 16 + hlen
    arrays = {}
    for ent in entries:
        start = base + ent["offset"]
        end = start + ent["nbytes"]
        if end > len(blob):
            raise CheckpointError(f"'{path}' is truncated (array '{ent['name']}')")
        a = np.frombuffer(blob[start:end], dtype="<f8").reshape(ent["shape"])
        arrays[ent["name"]] = a.copy()
    return meta, arrays
