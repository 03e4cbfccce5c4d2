"""Disk cache for eigenstates: one file per (frame, parameter-hash).

Layout (all integers little-endian):

    bytes 0..7    magic  b"AIONCST1"
    bytes 8..11   uint32 format version (currently 1)
    bytes 12..15  uint32 header length H
    bytes 16..16+H  UTF-8 JSON header: {"meta": {...}, "arrays": [
                      {"name": str, "dtype": "<f8", "shape": [...]}, ...]}
    then the raw array payloads, C-order, concatenated in header order.

Arrays are always stored little-endian; readers on big-endian hosts get a
byteswapped view converted to native order.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"AIONCST1"
FORMAT_VERSION = 1


class CacheFormatError(RuntimeError):
    pass


def params_key(meta: dict) -> str:
    """Stable hash of a JSON-serialisable description of a solve."""
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def write_state(path, arrays: dict, meta: dict):
    """Write named float arrays plus a JSON-serialisable meta block."""
    path = Path(path)
    entries = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "dtype": "<f8", "shape": list(arr.shape)})
        payloads.append(arr.tobytes())
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True).encode()
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)
    tmp.replace(path)


def read_state(path):
    """Read back (arrays, meta) written by `write_state`."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise CacheFormatError(f"{path}: not an eigenstate cache file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise CacheFormatError(f"{path}: unsupported cache version {version}")
        header = json.loads(fh.read(hlen).decode())
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CacheFormatError(f"{path}: truncated payload for {entry['name']}")
            arr = np.frombuffer(raw, dtype=entry["dtype"]).reshape(shape)
            arrays[entry["name"]] = arr.astype(float, copy=True)
    return arrays, header["meta"]


class StateCache:
    """Directory of cache files keyed by solve descriptions."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, meta: dict) -> Path:
        frame = meta.get("frame", "state")
        return self.root / f"{frame}-{params_key(meta)}.aion"

    def has(self, meta: dict) -> bool:
        return self.path_for(meta).exists()

    def load(self, meta: dict):
        return read_state(self.path_for(meta))

    def store(self, meta: dict, arrays: dict) -> Path:
        path = self.path_for(meta)
        write_state(path, arrays, meta)
        return path

    def entries(self):
        out = []
        for path in sorted(self.root.glob("*.aion")):
            try:
                with open(path, "rb") as fh:
                    if fh.read(8) != MAGIC:
                        continue
                    _, hlen = struct.unpack("<II", fh.read(8))
                    header = json.loads(fh.read(hlen).decode())
                out.append((path, header["meta"]))
            except (OSError, ValueError, KeyError):
                continue
        return out

    def clear(self) -> int:
        n = 0
        for path in self.root.glob("*.aion"):
            path.unlink()
            n += 1
        return n
