"""Versioned, checksummed snapshot container.

Layout: ``MAGIC | u16 version | sha256(body) | body`` where body is
zlib-compressed JSON. Numpy arrays are stored as base64 of their raw
little-endian bytes, so floats survive bit-exactly.
"""
from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
import zlib

import numpy as np

from .errors import CorruptSnapshot, VersionMismatch

MAGIC = b"AXSNAP\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<H")


def _encode_obj(obj):
    if isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj)
        return {
            "__nd__": base64.b64encode(arr.astype(arr.dtype.newbyteorder("<")).tobytes()).decode(),
            "dtype": arr.dtype.str.lstrip("<>|="),
            "shape": list(arr.shape),
        }
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _decode_hook(d: dict):
    if "__nd__" in d:
        raw = base64.b64decode(d["__nd__"])
        return np.frombuffer(raw, dtype=np.dtype("<" + d["dtype"])).reshape(d["shape"]).copy()
    return d


def pack(payload: dict, version: int = FORMAT_VERSION) -> bytes:
    body = zlib.compress(
        json.dumps(payload, default=_encode_obj, separators=(",", ":")).encode("utf-8"), 6
    )
    return MAGIC + _HEADER.pack(version) + hashlib.sha256(body).digest() + body


def unpack(blob: bytes, version: int = FORMAT_VERSION) -> dict:
    head = len(MAGIC) + _HEADER.size + 32
    if len(blob) < head or not blob.startswith(MAGIC):
        raise CorruptSnapshot("not a snapshot (bad magic or truncated header)")
    (found,) = _HEADER.unpack_from(blob, len(MAGIC))
    if found != version:
        raise VersionMismatch(f"snapshot format {found}, expected {version}")
    digest = blob[len(MAGIC) + _HEADER.size : head]
    body = blob[head:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptSnapshot("checksum mismatch")
    try:
        return json.loads(zlib.decompress(body).decode("utf-8"), object_hook=_decode_hook)
    except (zlib.error, ValueError) as exc:
        raise CorruptSnapshot(f"undecodable payload: {exc}") from None


def write(path, payload: dict):
    """Atomic write: a crash mid-write never leaves a half snapshot behind."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(pack(payload))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read(path) -> dict:
    with open(path, "rb") as fh:
        return unpack(fh.read())
