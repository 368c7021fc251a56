"""The 23 augmentation transforms plus the fixed pipeline ops (bilinear
resize, random crop, center crop).

Every transform is a pure function of an (H, W, 3) uint8 image and a
:class:`TransformInstance`; all randomness lives in the instance (its sign
and ``aux`` draws), so identical instances give bit-identical outputs.

Magnitude semantics
-------------------
The integer level M runs 0..30 and maps linearly onto each kind's
parameter range, ``lo + (M/30)(hi-lo)``, except where noted:

* solarize: threshold = 256 * (1 - M/30), so M=0 inverts nothing.
* solarize_add: add = round(100*M/30) to pixels below 128; pixels at or
  above 128 are left unchanged (M=0 is the identity).
* posterize: the parameter is the number of bit-planes removed,
  keep_bits = 8 - round(4*M/30).
* color/contrast/brightness/sharpness: two-sided around the neutral
  factor 1.0, factor = 1 + sign*0.9*(M/30), endpoints 0.1 / 1.9.
* scale / scale_xy: two-sided around 1.0, growing to 1 + 0.4*(M/30) or
  shrinking to 1 - 0.1*(M/30) by random sign, endpoints 0.9 / 1.4; M=0 is
  the identity.  scale_xy draws an independent level in [0, M] and an
  independent sign per axis.
* noise kinds: amplitude a = 0.4*M/30 on pixels normalized to [0,1]
  (uniform in (-a, a), or normal with sigma = a), then clamp and rescale.
* gaussian_blur: sigma = 2.0*M/30, kernel radius ceil(3*sigma),
  edge-clamped separable convolution.

Geometry uses bilinear interpolation with half-pixel centers about the
image center; pixels mapped from outside the source (and the cutout
interior) are filled with gray 128.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng, stream_floats, stream_normals
from .tensors import require_image8

MAX_LEVEL = 30
FILL_GRAY = 128

COLOR = "color"
SHAPE = "shape"


@dataclass(frozen=True)
class TransformKind:
    """One row of the transform table: name, category, parameter range."""

    name: str
    category: str                       # "color" or "shape"
    magnitude_range: tuple[float, float] | None
    signed: bool = False


KINDS: tuple[TransformKind, ...] = (
    # -- color (photometric), 13 kinds -------------------------------------
    TransformKind("auto_contrast", COLOR, None),
    TransformKind("equalize", COLOR, None),
    TransformKind("invert", COLOR, None),
    TransformKind("posterize", COLOR, (0.0, 4.0)),
    TransformKind("solarize", COLOR, (0.0, 256.0)),
    TransformKind("solarize_add", COLOR, (0.0, 100.0)),
    TransformKind("color", COLOR, (0.1, 1.9), signed=True),
    TransformKind("contrast", COLOR, (0.1, 1.9), signed=True),
    TransformKind("brightness", COLOR, (0.1, 1.9), signed=True),
    TransformKind("sharpness", COLOR, (0.1, 1.9), signed=True),
    TransformKind("random_noise", COLOR, (0.0, 0.4)),
    TransformKind("gaussian_noise", COLOR, (0.0, 0.4)),
    TransformKind("gaussian_blur", COLOR, (0.0, 2.0)),
    # -- shape (geometric), 10 kinds ----------------------------------------
    TransformKind("horizontal_flip", SHAPE, None),
    TransformKind("vertical_flip", SHAPE, None),
    TransformKind("rotate", SHAPE, (0.0, 30.0), signed=True),
    TransformKind("shear_x", SHAPE, (0.0, 0.3), signed=True),
    TransformKind("shear_y", SHAPE, (0.0, 0.3), signed=True),
    TransformKind("cutout", SHAPE, (0.0, 40.0)),
    TransformKind("translate_x", SHAPE, (0.0, 100.0), signed=True),
    TransformKind("translate_y", SHAPE, (0.0, 100.0), signed=True),
    TransformKind("scale", SHAPE, (0.9, 1.4), signed=True),
    TransformKind("scale_xy", SHAPE, (0.9, 1.4), signed=True),
)

KIND_BY_NAME: dict[str, TransformKind] = {k.name: k for k in KINDS}

# The 7 kinds that extend the original 16-transform search space.
EXTENDED_KIND_NAMES = frozenset(
    {"random_noise", "gaussian_noise", "gaussian_blur",
     "horizontal_flip", "vertical_flip", "scale", "scale_xy"}
)
BASE16_KINDS: tuple[TransformKind, ...] = tuple(
    k for k in KINDS if k.name not in EXTENDED_KIND_NAMES
)
COLOR_KINDS: tuple[TransformKind, ...] = tuple(k for k in KINDS if k.category == COLOR)
SHAPE_KINDS: tuple[TransformKind, ...] = tuple(k for k in KINDS if k.category == SHAPE)

# Kinds whose realization needs auxiliary draws beyond level and sign.
AUX_KINDS = frozenset({"cutout", "random_noise", "gaussian_noise", "scale_xy"})

_ENHANCE = frozenset({"color", "contrast", "brightness", "sharpness"})


@dataclass(frozen=True)
class TransformInstance:
    """A realized transform: kind plus fully resolved parameters.

    ``param`` sits inside the kind's magnitude range (None for the
    parameterless kinds); ``aux`` carries the extra draws some kinds need:
    cutout center as unit coordinates {"center_u", "center_v"}, a noise
    field seed {"seed"}, or the second axis factor {"factor_y"} for
    scale_xy (whose ``param`` is the x-axis factor).
    """

    kind: str
    level: int
    param: float | None
    sign: int = 1
    aux: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "level": self.level, "param": self.param,
               "sign": self.sign}
        if self.aux:
            out["aux"] = dict(self.aux)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TransformInstance":
        return cls(kind=obj["kind"], level=obj["level"], param=obj["param"],
                   sign=obj.get("sign", 1), aux=dict(obj.get("aux", {})))


def _scale_factor(level: int, sign: int) -> float:
    if sign >= 0:
        return 1.0 + 0.4 * level / MAX_LEVEL
    return 1.0 - 0.1 * level / MAX_LEVEL


def magnitude_to_param(kind: TransformKind, level: int, sign: int = 1) -> float | None:
    """Resolve an integer magnitude level to the kind's real parameter."""
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"magnitude level must be in [0, {MAX_LEVEL}], got {level}")
    if kind.magnitude_range is None:
        return None
    lo, hi = kind.magnitude_range
    if kind.name == "solarize":
        return 256.0 * (1.0 - level / MAX_LEVEL)
    if kind.name in _ENHANCE:
        return 1.0 + sign * 0.9 * level / MAX_LEVEL
    if kind.name in ("scale", "scale_xy"):
        return _scale_factor(level, sign)
    return lo + (level / MAX_LEVEL) * (hi - lo)


def realize(kind: TransformKind, level: int, rng: Rng) -> TransformInstance:
    """Draw sign and auxiliary parameters and build a concrete instance.

    Draw order per instance is fixed (sign, then aux) so a given rng
    stream always realizes the same instance.
    """
    sign = rng.sign() if kind.signed else 1
    aux: dict = {}
    if kind.name == "scale_xy":
        level_x = rng.randint(0, level) if level > 0 else 0
        level_y = rng.randint(0, level) if level > 0 else 0
        sign_y = rng.sign()
        param = _scale_factor(level_x, sign)
        aux = {"factor_y": _scale_factor(level_y, sign_y)}
        return TransformInstance(kind.name, level, param, sign, aux)
    param = magnitude_to_param(kind, level, sign)
    if kind.name == "cutout":
        aux = {"center_u": rng.random(), "center_v": rng.random()}
    elif kind.name in ("random_noise", "gaussian_noise"):
        aux = {"seed": rng.next_u64()}
    return TransformInstance(kind.name, level, param, sign, aux)


# ---------------------------------------------------------------------------
# pixel helpers


def _round_u8(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half up to uint8."""
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


def _luma(img: np.ndarray) -> np.ndarray:
    f = img.astype(np.float64)
    return 0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2]


def _blend(base: np.ndarray, img: np.ndarray, factor: float) -> np.ndarray:
    """base + factor * (img - base); factor 1.0 reproduces img exactly."""
    out = base + factor * (img.astype(np.float64) - base)
    return _round_u8(out)


def _apply_lut(img: np.ndarray, luts: np.ndarray) -> np.ndarray:
    # luts: (3, 256) uint8, one per channel
    out = np.empty_like(img)
    for c in range(3):
        out[:, :, c] = luts[c][img[:, :, c]]
    return out


def _sample_bilinear(img: np.ndarray, sx: np.ndarray, sy: np.ndarray,
                     fill: float) -> np.ndarray:
    """Bilinear sample at continuous source coords (half-pixel centers);
    neighbors outside the image contribute the fill value.

    Implemented over a 1-pixel fill border: coordinates are first clamped
    to [-0.5, dim + 0.5], which leaves partially-inside points untouched
    and parks fully-outside points on pure border texels, so no validity
    masks are needed in the inner loop.
    """
    h, w = img.shape[:2]
    fx = np.clip(sx, -0.5, w + 0.5) + 0.5   # padded-image coords
    fy = np.clip(sy, -0.5, h + 0.5) + 0.5
    x0 = np.minimum(np.floor(fx), w).astype(np.int64)
    y0 = np.minimum(np.floor(fy), h).astype(np.int64)
    dx = (fx - x0).reshape(-1, 1)
    dy = (fy - y0).reshape(-1, 1)
    padded = np.empty((h + 2, w + 2, 3), dtype=np.float64)
    padded[:] = float(fill)
    padded[1:h + 1, 1:w + 1] = img
    flat = padded.reshape(-1, 3)
    stride = w + 2
    base = (y0 * stride + x0).reshape(-1)
    v00 = flat[base]
    v01 = flat[base + 1]
    v10 = flat[base + stride]
    v11 = flat[base + stride + 1]
    top = v00 + dx * (v01 - v00)
    bot = v10 + dx * (v11 - v10)
    return _round_u8((top + dy * (bot - top)).reshape(sx.shape + (3,)))


def _affine(img: np.ndarray, inv: np.ndarray, fill: float = FILL_GRAY) -> np.ndarray:
    """Apply a 2x3 inverse map (output (x, y, 1) -> source (x, y)),
    coordinates measured at pixel centers."""
    h, w = img.shape[:2]
    xc = np.arange(w, dtype=np.float64)[None, :] + 0.5
    yc = np.arange(h, dtype=np.float64)[:, None] + 0.5
    sx = inv[0, 0] * xc + inv[0, 1] * yc + inv[0, 2]
    sy = inv[1, 0] * xc + inv[1, 1] * yc + inv[1, 2]
    return _sample_bilinear(img, np.broadcast_to(sx, (h, w)), np.broadcast_to(sy, (h, w)), fill)


def _centered_inverse(mat: np.ndarray, cx: float, cy: float) -> np.ndarray:
    """2x2 inverse linear map about the center -> full 2x3 inverse map."""
    inv = np.zeros((2, 3))
    inv[:, :2] = mat
    inv[0, 2] = cx - mat[0, 0] * cx - mat[0, 1] * cy
    inv[1, 2] = cy - mat[1, 0] * cx - mat[1, 1] * cy
    return inv


# ---------------------------------------------------------------------------
# individual transforms


def _tf_auto_contrast(img, t):
    luts = np.empty((3, 256), dtype=np.uint8)
    ramp = np.arange(256, dtype=np.float64)
    for c in range(3):
        lo = int(img[:, :, c].min())
        hi = int(img[:, :, c].max())
        if hi > lo:
            luts[c] = _round_u8((ramp - lo) * (255.0 / (hi - lo)))
        else:
            luts[c] = ramp.astype(np.uint8)
    return _apply_lut(img, luts)


def _tf_equalize(img, t):
    luts = np.empty((3, 256), dtype=np.uint8)
    ramp = np.arange(256, dtype=np.uint8)
    n = img.shape[0] * img.shape[1]
    for c in range(3):
        hist = np.bincount(img[:, :, c].reshape(-1), minlength=256)
        cdf = np.cumsum(hist)
        nonzero = np.nonzero(hist)[0]
        cdf_min = cdf[nonzero[0]]
        denom = n - cdf_min
        if denom <= 0:
            luts[c] = ramp
        else:
            luts[c] = _round_u8((cdf - cdf_min) * (255.0 / denom))
    return _apply_lut(img, luts)


def _tf_invert(img, t):
    return (255 - img.astype(np.int16)).astype(np.uint8)


def _tf_posterize(img, t):
    keep = 8 - int(math.floor(t.param + 0.5))
    mask = np.uint8((0xFF << (8 - keep)) & 0xFF)
    return img & mask


def _tf_solarize(img, t):
    out = img.copy()
    flip = img.astype(np.float64) >= t.param
    out[flip] = 255 - img[flip]
    return out


def _tf_solarize_add(img, t):
    add = int(math.floor(t.param + 0.5))
    out = img.astype(np.int16)
    below = out < 128
    out[below] = np.minimum(out[below] + add, 255)
    return out.astype(np.uint8)


def _tf_color(img, t):
    return _blend(_luma(img)[:, :, None], img, t.param)


def _tf_contrast(img, t):
    return _blend(float(_luma(img).mean()), img, t.param)


def _tf_brightness(img, t):
    return _blend(0.0, img, t.param)


_SHARPNESS_KERNEL = np.array([[1.0, 1.0, 1.0],
                              [1.0, 5.0, 1.0],
                              [1.0, 1.0, 1.0]]) / 13.0


def _tf_sharpness(img, t):
    padded = np.pad(img.astype(np.float64), ((1, 1), (1, 1), (0, 0)), mode="edge")
    smooth = np.zeros(img.shape, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            smooth += _SHARPNESS_KERNEL[dy, dx] * padded[
                dy:dy + img.shape[0], dx:dx + img.shape[1]]
    return _blend(smooth, img, t.param)


def _noise_field(t, shape, normal: bool) -> np.ndarray:
    count = int(np.prod(shape))
    seed = int(t.aux["seed"])
    if normal:
        field_ = stream_normals(seed, count) * t.param
    else:
        field_ = (stream_floats(seed, count) * 2.0 - 1.0) * t.param
    return field_.reshape(shape)


def _tf_random_noise(img, t):
    if t.param == 0.0:
        return img.copy()
    x = img.astype(np.float64) / 255.0 + _noise_field(t, img.shape, normal=False)
    return _round_u8(np.clip(x, 0.0, 1.0) * 255.0)


def _tf_gaussian_noise(img, t):
    if t.param == 0.0:
        return img.copy()
    x = img.astype(np.float64) / 255.0 + _noise_field(t, img.shape, normal=True)
    return _round_u8(np.clip(x, 0.0, 1.0) * 255.0)


def _tf_gaussian_blur(img, t):
    sigma = t.param
    if sigma <= 0.0:
        return img.copy()
    radius = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    f = img.astype(np.float64)
    padded = np.pad(f, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    horiz = np.zeros_like(f)
    for i, kv in enumerate(kernel):
        horiz += kv * padded[:, i:i + img.shape[1]]
    padded = np.pad(horiz, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    out = np.zeros_like(f)
    for i, kv in enumerate(kernel):
        out += kv * padded[i:i + img.shape[0]]
    return _round_u8(out)


def _tf_horizontal_flip(img, t):
    return img[:, ::-1].copy()


def _tf_vertical_flip(img, t):
    return img[::-1].copy()


def _tf_rotate(img, t):
    theta = math.radians(t.param * t.sign)
    if theta == 0.0:
        return img.copy()
    c, s = math.cos(theta), math.sin(theta)
    # inverse of a CCW rotation about the image center
    mat = np.array([[c, s], [-s, c]])
    h, w = img.shape[:2]
    return _affine(img, _centered_inverse(mat, w / 2.0, h / 2.0))


def _tf_shear_x(img, t):
    factor = t.param * t.sign
    if factor == 0.0:
        return img.copy()
    mat = np.array([[1.0, -factor], [0.0, 1.0]])
    h, w = img.shape[:2]
    return _affine(img, _centered_inverse(mat, w / 2.0, h / 2.0))


def _tf_shear_y(img, t):
    factor = t.param * t.sign
    if factor == 0.0:
        return img.copy()
    mat = np.array([[1.0, 0.0], [-factor, 1.0]])
    h, w = img.shape[:2]
    return _affine(img, _centered_inverse(mat, w / 2.0, h / 2.0))


def _tf_cutout(img, t):
    side = int(math.floor(t.param + 0.5))
    if side <= 0:
        return img.copy()
    h, w = img.shape[:2]
    cx = min(int(t.aux["center_u"] * w), w - 1)
    cy = min(int(t.aux["center_v"] * h), h - 1)
    x0 = max(cx - side // 2, 0)
    y0 = max(cy - side // 2, 0)
    x1 = min(x0 + side, w)
    y1 = min(y0 + side, h)
    out = img.copy()
    out[y0:y1, x0:x1] = FILL_GRAY
    return out


def _tf_translate_x(img, t):
    shift = t.param * t.sign
    if shift == 0.0:
        return img.copy()
    inv = np.array([[1.0, 0.0, -shift], [0.0, 1.0, 0.0]])
    return _affine(img, inv)


def _tf_translate_y(img, t):
    shift = t.param * t.sign
    if shift == 0.0:
        return img.copy()
    inv = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -shift]])
    return _affine(img, inv)


def _tf_scale(img, t, fy=None):
    factor_x = t.param
    factor_y = factor_x if fy is None else fy
    if factor_x == 1.0 and factor_y == 1.0:
        return img.copy()
    mat = np.array([[1.0 / factor_x, 0.0], [0.0, 1.0 / factor_y]])
    h, w = img.shape[:2]
    return _affine(img, _centered_inverse(mat, w / 2.0, h / 2.0))


def _tf_scale_xy(img, t):
    return _tf_scale(img, t, fy=t.aux["factor_y"])


_APPLY = {
    "auto_contrast": _tf_auto_contrast,
    "equalize": _tf_equalize,
    "invert": _tf_invert,
    "posterize": _tf_posterize,
    "solarize": _tf_solarize,
    "solarize_add": _tf_solarize_add,
    "color": _tf_color,
    "contrast": _tf_contrast,
    "brightness": _tf_brightness,
    "sharpness": _tf_sharpness,
    "random_noise": _tf_random_noise,
    "gaussian_noise": _tf_gaussian_noise,
    "gaussian_blur": _tf_gaussian_blur,
    "horizontal_flip": _tf_horizontal_flip,
    "vertical_flip": _tf_vertical_flip,
    "rotate": _tf_rotate,
    "shear_x": _tf_shear_x,
    "shear_y": _tf_shear_y,
    "cutout": _tf_cutout,
    "translate_x": _tf_translate_x,
    "translate_y": _tf_translate_y,
    "scale": _tf_scale,
    "scale_xy": _tf_scale_xy,
}


def apply_transform(img: np.ndarray, t: TransformInstance) -> np.ndarray:
    """Apply one realized transform; output has the input's dimensions."""
    arr = require_image8(img)
    try:
        fn = _APPLY[t.kind]
    except KeyError:
        raise ValueError(f"unknown transform kind {t.kind!r}") from None
    return fn(arr, t)


# ---------------------------------------------------------------------------
# fixed pipeline ops


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping."""
    arr = require_image8(img)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    h, w = arr.shape[:2]
    if (out_h, out_w) == (h, w):
        return arr.copy()
    out = resize_bilinear_float(arr.astype(np.float64), out_h, out_w)
    return _round_u8(out)


def resize_bilinear_float(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Float bilinear resize (2-D or 2-D+channels), edge-clamped."""
    h, w = arr.shape[:2]
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(sy), 0, h - 1).astype(np.int64)
    x0 = np.clip(np.floor(sx), 0, w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(sy - y0, 0.0, 1.0)
    wx = np.clip(sx - x0, 0.0, 1.0)
    if arr.ndim == 3:
        wy_ = wy[:, None, None]
        wx_ = wx[None, :, None]
    else:
        wy_ = wy[:, None]
        wx_ = wx[None, :]
    ri = y0[:, None]
    rj = y1[:, None]
    ci = x0[None, :]
    cj = x1[None, :]
    top = arr[ri, ci] * (1 - wx_) + arr[ri, cj] * wx_
    bot = arr[rj, ci] * (1 - wx_) + arr[rj, cj] * wx_
    return top * (1 - wy_) + bot * wy_


def random_crop(img: np.ndarray, size: int = 224, rng: Rng | None = None) -> tuple[np.ndarray, tuple[int, int]]:
    """Uniform random size x size window; returns (crop, (row, col) offset)."""
    if rng is None:
        raise ValueError("random_crop requires an rng stream")
    arr = require_image8(img)
    h, w = arr.shape[:2]
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} smaller than crop size {size}")
    oy = rng.randint(0, h - size)
    ox = rng.randint(0, w - size)
    return arr[oy:oy + size, ox:ox + size].copy(), (oy, ox)


def center_crop(img: np.ndarray, size: int = 224) -> np.ndarray:
    arr = require_image8(img)
    h, w = arr.shape[:2]
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} smaller than crop size {size}")
    oy = (h - size) // 2
    ox = (w - size) // 2
    return arr[oy:oy + size, ox:ox + size].copy()
