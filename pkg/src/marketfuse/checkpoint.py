"""Binary checkpoint files for fusion parameters and the classifier head.

Layout (all integers little-endian uint32, all floats little-endian
float64, matrices row-major / C order):

    bytes 0..7   magic b"STONKFUS"
    uint32       format version (currently 1)
    uint32       config length L, then L bytes of UTF-8 canonical JSON
                 (sorted keys) echoing the resolved run configuration,
                 including its hash
    uint32       array count
    per array:   uint32 name length, name bytes,
                 uint32 ndim, ndim * uint32 dims,
                 prod(dims) float64 values

Matrices appear in declared parameter order (W_x, W_y, W_q, W_k, W_v, W_f,
layer-norm vectors), followed by the head (head_w then head_b). Because the
payload is raw float64 bytes, a save/load/save cycle is bitwise identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityError, SchemaError

MAGIC = b"STONKFUS"
VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    config: dict
    arrays: dict[str, np.ndarray]


def save_checkpoint(path, config: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    config_bytes = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(config_bytes)))
        fh.write(config_bytes)
        fh.write(struct.pack("<I", len(arrays)))
        for name, array in arrays:
            data = np.ascontiguousarray(array, dtype="<f8")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(data.tobytes(order="C"))


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise SchemaError(f"{path}: truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise SchemaError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
        if version != VERSION:
            raise CompatibilityError(f"{path}: checkpoint version {version}, expected {VERSION}")
        (config_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "config length"))
        try:
            config = json.loads(_read_exact(fh, config_len, path, "config").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{path}: corrupt config block: {exc}") from None
        (count,) = struct.unpack("<I", _read_exact(fh, 4, path, "array count"))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "array name length"))
            name = _read_exact(fh, name_len, path, "array name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4, path, "array rank"))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, path, f"{name} dim"))[0] for _ in range(ndim)
            )
            n_values = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, 8 * n_values, path, f"{name} data")
            arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise SchemaError(f"{path}: trailing bytes after checkpoint payload")
    return Checkpoint(config=config, arrays=arrays)
