"""Binary checkpoint format.

Layout (all integers little-endian):

    magic       4 bytes  b"DAAE"
    version     u32
    array count u32
    per array:  u16 name length, name (utf-8), u8 rank, rank * u32 dims,
                float64 values
    run state   u32 length + canonical JSON (epoch, optimizer step counters,
                rng state)
    config echo u32 length + canonical JSON

Canonical JSON (sorted keys, no whitespace) plus ordered arrays make
save -> load -> save byte-identical. Files are written to a temp path and
atomically renamed; loads parse fully before returning, so a truncated file
never yields partial state.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError

MAGIC = b"DAAE"
VERSION = 1


@dataclass
class Checkpoint:
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    run_state: dict = field(default_factory=dict)
    config_echo: dict = field(default_factory=dict)
    version: int = VERSION


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    chunks = [MAGIC, struct.pack("<I", ckpt.version),
              struct.pack("<I", len(ckpt.arrays))]
    for name, arr in ckpt.arrays.items():
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise CheckpointError(f"array name too long: {name!r}")
        # asarray keeps rank-0 arrays rank-0 (ascontiguousarray would not)
        arr = np.asarray(arr, dtype=np.float64, order="C")
        if arr.ndim > 0xFF:
            raise CheckpointError(f"array rank too large: {arr.ndim}")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    for block in (ckpt.run_state, ckpt.config_echo):
        payload = _canonical_json(block)
        chunks.append(struct.pack("<I", len(payload)))
        chunks.append(payload)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(b"".join(chunks))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(
                f"{self.path}: truncated checkpoint while reading {what}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what):
        return struct.unpack("<B", self.take(1, what))[0]

    def u16(self, what):
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    r = _Reader(buf, path)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(
            f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version}")
    count = r.u32("array count")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = r.u16("name length")
        name = r.take(name_len, "array name").decode("utf-8")
        rank = r.u8("rank")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "dims"))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = r.take(8 * size, f"values of {name!r}")
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    blocks = []
    for what in ("run state", "config echo"):
        length = r.u32(f"{what} length")
        blocks.append(json.loads(r.take(length, what).decode("utf-8")))
    if r.pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - r.pos} trailing bytes")
    return Checkpoint(arrays=arrays, run_state=blocks[0],
                      config_echo=blocks[1], version=version)
