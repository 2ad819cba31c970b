"""Bit-exact checkpoint serialization (MIC1).

Layout, all integers little-endian:

    magic "MIC1" | u32 version=1 | u32 tensor_count
    per tensor:  u16 name_len | name utf-8 | u32 ndim | u32 dims[ndim] |
                 float32 data, row-major
    u32 stat_count
    per stat:    u16 name_len | name utf-8 | f64 value

Stats carry the training hyperparameters and the dataset standardization
statistics, so a checkpoint is all an inference run needs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

MAGIC = b"MIC1"
VERSION = 1


@dataclass
class Checkpoint:
    """Ordered named parameter tensors plus scalar stats."""

    params: dict[str, np.ndarray] = field(default_factory=dict)
    stats: dict[str, float] = field(default_factory=dict)
    version: int = VERSION

    def stat(self, name: str, default: float | None = None) -> float:
        if name in self.stats:
            return self.stats[name]
        if default is not None:
            return default
        raise KeyError(f"checkpoint has no stat {name!r}")


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", ckpt.version, len(ckpt.params)))
        for name, tensor in ckpt.params.items():
            data = np.ascontiguousarray(tensor, dtype="<f4")
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())
        fh.write(struct.pack("<I", len(ckpt.stats)))
        for name, value in ckpt.stats.items():
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<d", float(value)))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, path)
    if r.take(4) != MAGIC:
        raise FormatError(f"{path}: bad magic, not a checkpoint file")
    version, n_tensors = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    params: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<I")
        dims = r.unpack(f"<{ndim}I")
        count = int(np.prod(dims)) if ndim else 1
        data = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(dims)
        params[name] = data.copy()
    stats: dict[str, float] = {}
    (n_stats,) = r.unpack("<I")
    for _ in range(n_stats):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (value,) = r.unpack("<d")
        stats[name] = value
    if r.pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - r.pos} trailing bytes")
    return Checkpoint(params=params, stats=stats, version=version)
