"""Core image/tensor types, the TSR1/VOL1 interchange formats, and
volume-to-slice ingestion.

Array conventions
-----------------
Image8      uint8 ndarray of shape (H, W, 3), RGB, row-major.
TensorF32   float32 ndarray, 1-4 axes, all values finite, no zero extents.
Volume      float32 ndarray of shape (sagittal, coronal, axial); axis 0 is
            always the sagittal axis (fixed by the VOL1 format, so readers
            never have to guess).

TSR1 byte layout (little-endian, bit-exact round-trip):
    bytes 0-3   magic b"TSR1"
    byte  4     dtype code (0x01 = float32 LE)
    byte  5     ndim, 1..4
    next        ndim * uint32 extents
    rest        row-major float32 payload

VOL1 byte layout:
    bytes 0-3   magic b"VOL1"
    next        3 * uint32 extents (sagittal, coronal, axial)
    rest        float32 payload, sagittal-major row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

TSR1_MAGIC = b"TSR1"
VOL1_MAGIC = b"VOL1"
DTYPE_F32 = 0x01

# Slices thinner than this cannot survive the 20 + 20 sagittal trim.
_SAGITTAL_TRIM = 20


class TensorFormatError(ValueError):
    """Malformed TSR1/VOL1 bytes (bad magic, dims, or truncated payload)."""


def require_image8(img: np.ndarray) -> np.ndarray:
    """Validate the (H, W, 3) uint8 image contract and return the array."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValueError(f"image must be uint8, got {arr.dtype}")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got {arr.shape}")
    return arr


def _require_tensor_f32(t: np.ndarray) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float32)
    if arr.ndim < 1 or arr.ndim > 4:
        raise ValueError(f"tensor must have 1-4 axes, got {arr.ndim}")
    if any(d == 0 for d in arr.shape):
        raise ValueError(f"tensor extents must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or Inf")
    return np.ascontiguousarray(arr)


def tensor_write(t: np.ndarray, path) -> None:
    """Write a float32 tensor in TSR1 format (validates the tensor first)."""
    arr = _require_tensor_f32(t)
    with open(path, "wb") as fh:
        fh.write(TSR1_MAGIC)
        fh.write(bytes([DTYPE_F32, arr.ndim]))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype("<f4", copy=False).tobytes())


def tensor_read(path) -> np.ndarray:
    """Read a TSR1 file back into a float32 ndarray, bit-exactly."""
    data = Path(path).read_bytes()
    if len(data) < 6:
        raise TensorFormatError(f"{path}: truncated header")
    if data[:4] != TSR1_MAGIC:
        raise TensorFormatError(f"{path}: bad magic {data[:4]!r}, expected {TSR1_MAGIC!r}")
    if data[4] != DTYPE_F32:
        raise TensorFormatError(f"{path}: unknown dtype code {data[4]:#x}")
    ndim = data[5]
    if not 1 <= ndim <= 4:
        raise TensorFormatError(f"{path}: ndim must be 1-4, got {ndim}")
    header_end = 6 + 4 * ndim
    if len(data) < header_end:
        raise TensorFormatError(f"{path}: truncated extents")
    dims = struct.unpack(f"<{ndim}I", data[6:header_end])
    if any(d == 0 for d in dims):
        raise TensorFormatError(f"{path}: zero extent in {dims}")
    count = int(np.prod(dims, dtype=np.int64))
    payload = data[header_end:]
    if len(payload) != 4 * count:
        raise TensorFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {4 * count}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32, copy=True)


def volume_write(vol: np.ndarray, path) -> None:
    """Write a (sagittal, coronal, axial) float32 volume in VOL1 format."""
    arr = np.ascontiguousarray(vol, dtype=np.float32)
    if arr.ndim != 3:
        raise ValueError(f"volume must have 3 axes, got {arr.ndim}")
    if any(d == 0 for d in arr.shape):
        raise ValueError(f"volume extents must be positive, got {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(VOL1_MAGIC)
        fh.write(struct.pack("<3I", *arr.shape))
        fh.write(arr.astype("<f4", copy=False).tobytes())


def volume_read(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise TensorFormatError(f"{path}: truncated header")
    if data[:4] != VOL1_MAGIC:
        raise TensorFormatError(f"{path}: bad magic {data[:4]!r}, expected {VOL1_MAGIC!r}")
    dims = struct.unpack("<3I", data[4:16])
    if any(d == 0 for d in dims):
        raise TensorFormatError(f"{path}: zero extent in {dims}")
    count = dims[0] * dims[1] * dims[2]
    payload = data[16:]
    if len(payload) != 4 * count:
        raise TensorFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {4 * count}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32, copy=True)


def volume_to_slices(vol: np.ndarray) -> list[np.ndarray]:
    """Turn a registered volume into a stack of RGB slice images.

    The first and last 20 sagittal slices are discarded (a sagittal extent
    of E yields E - 40 slices); each remaining (coronal, axial) slice is
    min-max scaled to [0, 255] per slice with round-half-up and replicated
    to the R, G and B channels.  A constant-intensity slice maps to uniform
    mid-gray 128 (the min-max scale is degenerate there).
    """
    arr = np.asarray(vol, dtype=np.float32)
    if arr.ndim != 3:
        raise ValueError(f"volume must have 3 axes, got {arr.ndim}")
    extent = arr.shape[0]
    if extent <= 2 * _SAGITTAL_TRIM:
        raise ValueError(
            f"volume too thin: sagittal extent {extent} leaves no slices "
            f"after discarding {_SAGITTAL_TRIM}+{_SAGITTAL_TRIM}"
        )
    slices = []
    for i in range(_SAGITTAL_TRIM, extent - _SAGITTAL_TRIM):
        plane = arr[i].astype(np.float64)
        lo = plane.min()
        hi = plane.max()
        if hi > lo:
            scaled = np.floor((plane - lo) * (255.0 / (hi - lo)) + 0.5)
        else:
            scaled = np.full_like(plane, 128.0)
        gray = np.clip(scaled, 0, 255).astype(np.uint8)
        slices.append(np.repeat(gray[:, :, None], 3, axis=2))
    return slices


def image_to_tensor(img: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 image -> (3, H, W) float32 tensor scaled to [0, 1]."""
    arr = require_image8(img)
    return (arr.astype(np.float32) / 255.0).transpose(2, 0, 1)


def image_write_png(img: np.ndarray, path) -> None:
    Image.fromarray(require_image8(img), mode="RGB").save(path, format="PNG")


def image_read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return require_image8(np.asarray(im.convert("RGB")))
