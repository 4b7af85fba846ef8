"""Deterministic seed derivation, stable hashing, and fingerprints.

Every stochastic operation in the package draws from a ``numpy`` generator
whose seed is derived here. Child seeds are stable 64-bit hashes of
(base seed, purpose tag, indices...), so parallel and sequential executions
of the same configuration produce bit-identical results.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Any

import numpy as np

__all__ = [
    "derive_seed",
    "config_fingerprint",
    "dataset_fingerprint",
    "mix64",
    "sample_keys",
    "epoch_order",
]

_MASK64 = (1 << 64) - 1


def _feed(h, part) -> None:
    # Type-tagged, length-prefixed encoding: no two distinct part tuples
    # can produce the same byte stream.
    if isinstance(part, bool):
        h.update(b"b" + bytes([part]))
    elif isinstance(part, (int, np.integer)):
        h.update(b"i" + struct.pack("<Q", int(part) & _MASK64))
    elif isinstance(part, (float, np.floating)):
        h.update(b"f" + struct.pack("<d", float(part)))
    elif isinstance(part, str):
        raw = part.encode("utf-8")
        h.update(b"s" + struct.pack("<I", len(raw)) + raw)
    else:
        raise TypeError(f"cannot derive a seed from {type(part).__name__}")


def derive_seed(*parts: int | float | str) -> int:
    """Stable 64-bit child seed from a base seed plus purpose tags/indices."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        _feed(h, part)
    return int.from_bytes(h.digest(), "little")


def _canonical(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def config_fingerprint(payload: Any) -> str:
    """Hex fingerprint of an arbitrary JSON-serializable configuration."""
    text = json.dumps(_canonical(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(text.encode("utf-8"), digest_size=16).hexdigest()


def dataset_fingerprint(features: np.ndarray, labels: np.ndarray) -> str:
    """64-bit hex fingerprint of the serialized sample stream."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<QQ", labels.shape[0], features.shape[1] if features.ndim == 2 else 0))
    h.update(np.ascontiguousarray(labels, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(features, dtype=np.float64).tobytes())
    return h.hexdigest()


_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


def mix64(x: np.ndarray | int) -> np.ndarray:
    """Vectorized splitmix64 finalizer; uint64 arithmetic wraps by design."""
    v = np.asarray(x, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        v ^= v >> _S30
        v *= _M1
        v ^= v >> _S27
        v *= _M2
        v ^= v >> _S31
    return v


def sample_keys(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Content hash per sample; equal rows always receive equal keys.

    Used to key the training shuffle so that duplicated samples stay adjacent,
    which preserves averaged mini-batch gradients under dataset duplication.
    """
    feats = np.ascontiguousarray(features, dtype=np.float64)
    keys = mix64(np.asarray(labels, dtype=np.uint64))
    bits = feats.view(np.uint64)
    for j in range(bits.shape[1]):
        keys = mix64(keys ^ bits[:, j])
    return keys


def epoch_order(keys: np.ndarray, seed: int, epoch: int) -> np.ndarray:
    """Deterministic per-epoch sample order: stable argsort of salted keys."""
    salt = mix64(np.uint64((derive_seed(seed, "shuffle", epoch)) & _MASK64))
    return np.argsort(mix64(keys ^ salt), kind="stable")
