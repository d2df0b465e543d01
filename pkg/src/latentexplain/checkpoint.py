"""Binary checkpoint container: magic "AXG1", JSON header, raw float32 blobs."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"AXG1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: str  # "codec" or "classifier"
    config: dict
    params: dict  # name -> np.float32 ndarray
    metadata: dict = field(default_factory=dict)

    def param_copy(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    names = list(ckpt.params.keys())
    table = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(ckpt.params[name], dtype="<f4")
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = {
        "version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "config": ckpt.config,
        "tensors": table,
        "metadata": ckpt.metadata,
    }
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(hjson)))
        f.write(hjson)
        for name in names:
            f.write(np.ascontiguousarray(ckpt.params[name], dtype="<f4").tobytes())


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"bad magic {raw[:4]!r}")
    (hlen,) = struct.unpack_from("<I", raw, 4)
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable header: {e}") from e
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    base = 8 + hlen
    params = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = base + entry["offset"]
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=start)
        params[entry["name"]] = arr.reshape(shape).copy()
    return Checkpoint(header["kind"], header["config"], params, header.get("metadata", {}))


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def params_sha256(params: dict) -> str:
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name], dtype="<f4").tobytes())
    return h.hexdigest()
