"""Golden forward records: a flat float64 array behind a small binary header.

Layout (little endian)::

    magic  8 bytes  b"TRMBGLD1"
    ndim   uint32
    shape  ndim x uint64
    seed   uint64
    sha256 32 bytes of the payload
    data   prod(shape) x float64
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._io import atomic_write
from .config import TrambaConfig
from .model import Tramba
from .training import synthetic_batch

MAGIC = b"TRMBGLD1"


@dataclass
class GoldenRecord:
    data: np.ndarray
    seed: int
    checksum: bytes


def encode_golden(arr: np.ndarray, seed: int) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    payload = arr.tobytes()
    header = MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    header += struct.pack("<Q", seed) + hashlib.sha256(payload).digest()
    return header + payload


def write_golden(path, arr: np.ndarray, seed: int) -> Path:
    return atomic_write(path, encode_golden(arr, seed))


def read_golden(path) -> GoldenRecord:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a golden record")
    (ndim,) = struct.unpack_from("<I", raw, 8)
    off = 12
    shape = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    (seed,) = struct.unpack_from("<Q", raw, off)
    off += 8
    checksum = raw[off:off + 32]
    payload = raw[off + 32:]
    if hashlib.sha256(payload).digest() != checksum:
        raise ValueError(f"{path}: payload checksum mismatch")
    data = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    return GoldenRecord(data, seed, checksum)


def golden_forward(seed: int = 0, config: TrambaConfig | None = None) -> np.ndarray:
    """Full-resolution logits of a seeded model on a seeded synthetic image."""
    config = (config or TrambaConfig(input_size=(32, 32), base_channels=8)).replace(seed=seed)
    imgs, _ = synthetic_batch(1, config.input_size, seed)
    return Tramba(config).forward(imgs).y_seg0
