"""Standalone TSR1 tensor file reader/writer for the bridge scripts.

Deliberately independent of the main package: the bridge talks to it only
through files, so this module re-implements the format from its byte
layout (magic "TSR1", dtype code 0x01 = float32 LE, ndim byte, uint32
extents, row-major payload).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class TsrError(ValueError):
    pass


def read_tsr(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 6:
        raise TsrError(f"{path}: truncated header")
    if data[:4] != b"TSR1":
        raise TsrError(f"{path}: bad magic {data[:4]!r}")
    if data[4] != 0x01:
        raise TsrError(f"{path}: unsupported dtype code {data[4]:#x}")
    ndim = data[5]
    if not 1 <= ndim <= 4:
        raise TsrError(f"{path}: bad ndim {ndim}")
    end = 6 + 4 * ndim
    if len(data) < end:
        raise TsrError(f"{path}: truncated extents")
    dims = struct.unpack(f"<{ndim}I", data[6:end])
    if any(d == 0 for d in dims):
        raise TsrError(f"{path}: zero extent {dims}")
    count = 1
    for d in dims:
        count *= d
    payload = data[end:]
    if len(payload) != 4 * count:
        raise TsrError(f"{path}: payload {len(payload)} bytes, wanted {4 * count}")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def write_tsr(arr: np.ndarray, path) -> None:
    out = np.ascontiguousarray(arr, dtype=np.float32)
    if not 1 <= out.ndim <= 4:
        raise TsrError(f"tensor must have 1-4 axes, got {out.ndim}")
    if any(d == 0 for d in out.shape):
        raise TsrError(f"zero extent in {out.shape}")
    if not np.isfinite(out).all():
        raise TsrError("tensor has non-finite values")
    with open(path, "wb") as fh:
        fh.write(b"TSR1")
        fh.write(bytes([0x01, out.ndim]))
        fh.write(struct.pack(f"<{out.ndim}I", *out.shape))
        fh.write(out.astype("<f4", copy=False).tobytes())
