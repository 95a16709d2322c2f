"""Versioned binary container for named float64 tensors with a checksum.

Layout: magic `ECTF`, u32 format version, length-prefixed JSON header,
u32 tensor count, then per tensor a length-prefixed UTF-8 name, u8 rank,
u64 dims, and row-major little-endian float64 data. The file ends with a
SHA-256 digest of every preceding byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ECTF"
FORMAT_VERSION = 1


class TensorFileError(IOError):
    pass


def save_tensors(path: str | Path, header: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(header_bytes))
    blob += header_bytes
    blob += struct.pack("<I", len(tensors))
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype="<f8")
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<H", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            blob += struct.pack("<Q", dim)
        blob += arr.tobytes()
    blob += hashlib.sha256(bytes(blob)).digest()
    Path(path).write_bytes(bytes(blob))


def load_tensors(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < 44 or data[:4] != MAGIC:
        raise TensorFileError(f"{path}: not a tensor container file")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise TensorFileError(f"{path}: checksum mismatch, file is corrupt")

    offset = 4
    (version,) = struct.unpack_from("<I", body, offset)
    offset += 4
    if version != FORMAT_VERSION:
        raise TensorFileError(f"{path}: unsupported format version {version}")
    (header_len,) = struct.unpack_from("<I", body, offset)
    offset += 4
    header = json.loads(body[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    (count,) = struct.unpack_from("<I", body, offset)
    offset += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", body, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}Q", body, offset)
        offset += 8 * ndim
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(body, dtype="<f8", count=size, offset=offset).reshape(shape)
        offset += 8 * size
        tensors[name] = arr.astype(np.float64)
    if offset != len(body):
        raise TensorFileError(f"{path}: trailing bytes after last tensor")
    return header, tensors
