"""WT1 tensor container with a JSON sidecar.

Layout: magic ``b"WT1\\0"``, ``u8`` dtype code (0 = f32, 1 = f64), ``u8``
ndim, ``ndim`` little-endian ``u64`` extents, then the row-major
little-endian payload. Complex arrays are stored as real arrays with a
trailing axis of length 2 and ``"complex": true`` in the sidecar
``<path>.json``, which also carries free-form metadata.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"WT1\0"
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class ContainerError(ValueError):
    pass


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def encode(array: np.ndarray) -> bytes:
    a = np.asarray(array)
    if np.iscomplexobj(a):
        a = np.stack([a.real, a.imag], axis=-1)
    if a.dtype not in CODES:
        raise ContainerError(f"unsupported dtype {a.dtype}; WT1 stores float32/float64 (and complex)")
    if a.ndim > 255:
        raise ContainerError("too many dimensions")
    head = MAGIC + struct.pack("<BB", CODES[a.dtype], a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return head + np.ascontiguousarray(a, dtype=DTYPES[CODES[a.dtype]]).tobytes()


def decode(buf: bytes, is_complex: bool = False) -> np.ndarray:
    if len(buf) < 6 or buf[:4] != MAGIC:
        raise ContainerError("not a WT1 file (bad magic)")
    code, ndim = struct.unpack_from("<BB", buf, 4)
    if code not in DTYPES:
        raise ContainerError(f"unknown dtype code {code}")
    off = 6 + 8 * ndim
    if len(buf) < off:
        raise ContainerError("truncated header")
    shape = struct.unpack_from(f"<{ndim}Q", buf, 6)
    dt = DTYPES[code]
    n = int(np.prod(shape, dtype=np.int64))
    if len(buf) != off + n * dt.itemsize:
        raise ContainerError(f"payload size {len(buf) - off} does not match extents {shape}")
    a = np.frombuffer(buf, dtype=dt, count=n, offset=off).reshape(shape).astype(dt.newbyteorder("="))
    if is_complex:
        if ndim == 0 or shape[-1] != 2:
            raise ContainerError("complex tensor needs a trailing axis of length 2")
        a = a[..., 0] + 1j * a[..., 1]
    return a


def write_tensor(path, array: np.ndarray, meta: dict | None = None) -> None:
    path = Path(path)
    array = np.asarray(array)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(array))
    os.replace(tmp, path)
    side = {"format": "WT1", "complex": bool(np.iscomplexobj(array)), "meta": meta or {}}
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True))


def read_tensor(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    side = {}
    sp = sidecar_path(path)
    if sp.exists():
        side = json.loads(sp.read_text())
    return decode(path.read_bytes(), bool(side.get("complex", False))), side.get("meta", {})
