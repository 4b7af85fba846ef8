"""Frozen generator parameter snapshots and their binary file format.

Layout: magic bytes ``GAFI``, format version (u16 LE), model kind tag (u8),
epoch / num_classes / feature_dim / latent_dim (u32 LE each), block count
(u16 LE), then named parameter blocks. Each block is a length-prefixed
utf-8 name, the rank (u8), the dimensions (u32 LE each), and the values as
64-bit little-endian reals. Reloading is bit-exact.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..errors import CheckpointFormatError

__all__ = [
    "GeneratorCheckpoint",
    "checkpoint_to_bytes",
    "checkpoint_from_bytes",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_fingerprint",
]

MAGIC = b"GAFI"
FORMAT_VERSION = 1
KIND_TAGS = {"gmm": 1, "tiny-gan": 2}
_TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GeneratorCheckpoint:
    """Immutable snapshot of a conditional generator at one training step.

    Sampling from a checkpoint never mutates it; two loads of the same file
    sample identically given equal seeds.
    """

    epoch: int
    model_kind: str
    num_classes: int
    feature_dim: int
    latent_dim: int
    params: Mapping[str, np.ndarray]

    def __post_init__(self):
        if self.model_kind not in KIND_TAGS:
            raise CheckpointFormatError(f"unknown model kind {self.model_kind!r}")
        frozen = {name: _frozen(arr) for name, arr in self.params.items()}
        object.__setattr__(self, "params", MappingProxyType(frozen))

    def __reduce__(self):
        # The on-disk format doubles as the pickle payload (mappingproxy
        # fields are not directly picklable).
        return (checkpoint_from_bytes, (checkpoint_to_bytes(self),))


def checkpoint_to_bytes(cp: GeneratorCheckpoint) -> bytes:
    chunks = [
        MAGIC,
        struct.pack("<H", FORMAT_VERSION),
        struct.pack("<B", KIND_TAGS[cp.model_kind]),
        struct.pack("<IIII", cp.epoch, cp.num_classes, cp.feature_dim, cp.latent_dim),
        struct.pack("<H", len(cp.params)),
    ]
    for name in sorted(cp.params):
        arr = cp.params[name]
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8", copy=False).tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError("truncated checkpoint data")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def checkpoint_from_bytes(data: bytes) -> GeneratorCheckpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointFormatError("bad magic bytes; not a checkpoint file")
    (version,) = r.unpack("<H")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported format version {version}")
    (tag,) = r.unpack("<B")
    if tag not in _TAG_KINDS:
        raise CheckpointFormatError(f"unknown model kind tag {tag}")
    epoch, num_classes, feature_dim, latent_dim = r.unpack("<IIII")
    (n_blocks,) = r.unpack("<H")
    params: dict[str, np.ndarray] = {}
    for _ in range(n_blocks):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(shape)
        params[name] = arr
    if r.pos != len(data):
        raise CheckpointFormatError("trailing bytes after final parameter block")
    return GeneratorCheckpoint(
        epoch=epoch, model_kind=_TAG_KINDS[tag], num_classes=num_classes,
        feature_dim=feature_dim, latent_dim=latent_dim, params=params,
    )


def save_checkpoint(cp: GeneratorCheckpoint, path) -> None:
    """Write atomically: the file is complete or absent, never partial."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(checkpoint_to_bytes(cp))
    os.replace(tmp, path)


def load_checkpoint(path) -> GeneratorCheckpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())


def checkpoint_fingerprint(cp: GeneratorCheckpoint) -> str:
    """Hex fingerprint of the serialized checkpoint."""
    return hashlib.blake2b(checkpoint_to_bytes(cp), digest_size=8).hexdigest()
