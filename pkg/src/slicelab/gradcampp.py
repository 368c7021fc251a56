"""Grad-CAM++ heatmaps from last-convolution feature maps and gradients.

Inputs are a feature-map stack ``A (K, H, W)``, the first-order gradients
``G (K, H, W)`` of the pre-softmax class score S w.r.t. A, and the score
itself.  The class response is modeled as exp(S), which makes the second
and third derivatives closed-form multiples of G (exp(S) * G**2 and
exp(S) * G**3); the shared exp(S) factor cancels inside the position
weights and only rescales the channel weights, so it is dropped outright
(heatmaps are max-normalized and the rendered output is scale-free).

Position weights:   alpha = G^2 / (2 G^2 + sum_ab(A) * G^3 + eps),
                    defined as 0 wherever G = 0.
Channel weights:    w_k = sum_ij alpha * relu(G).
Heatmap:            L = relu(sum_k w_k A_k), then scaled so max(L) = 1.

The plain Grad-CAM baseline (channel weights = mean gradient) is included
because substituting alpha = 1/(H*W) and dropping the relu reduces the
computation to it exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensors import require_image8, tensor_read, tensor_write
from .transforms import resize_bilinear_float

EPSILON = 1e-8


@dataclass(frozen=True)
class FeatureMapBundle:
    """Feature maps A, gradients G (both (K, H, W)), class score and index."""

    feature_maps: np.ndarray
    gradients: np.ndarray
    score: float
    class_index: int

    def __post_init__(self) -> None:
        a = np.asarray(self.feature_maps, dtype=np.float64)
        g = np.asarray(self.gradients, dtype=np.float64)
        if a.ndim != 3 or g.shape != a.shape:
            raise ValueError(
                f"A and G must both be (K, H, W), got {a.shape} and {g.shape}"
            )
        if not (np.isfinite(a).all() and np.isfinite(g).all() and np.isfinite(self.score)):
            raise ValueError("bundle contains non-finite values")
        if self.class_index not in (0, 1):
            raise ValueError(f"class_index must be 0 or 1, got {self.class_index}")
        object.__setattr__(self, "feature_maps", a)
        object.__setattr__(self, "gradients", g)


@dataclass(frozen=True)
class Heatmap:
    values: np.ndarray      # (H, W), non-negative
    normalized: bool        # max value is 1 when any response is positive

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or (v < 0).any():
            raise ValueError("heatmap must be a non-negative 2-D array")
        object.__setattr__(self, "values", v)


def alpha(bundle: FeatureMapBundle) -> np.ndarray:
    """Per-position gradient weights, shape (K, H, W)."""
    g = bundle.gradients
    a_sum = bundle.feature_maps.sum(axis=(1, 2), keepdims=True)
    g2 = g * g
    denom = 2.0 * g2 + a_sum * (g2 * g) + EPSILON
    out = np.where(g != 0.0, g2 / denom, 0.0)
    return out


def channel_weights(bundle: FeatureMapBundle) -> np.ndarray:
    """Per-channel weights: positions weighted by alpha, positive gradients only."""
    return (alpha(bundle) * np.maximum(bundle.gradients, 0.0)).sum(axis=(1, 2))


def _combine(feature_maps: np.ndarray, weights: np.ndarray) -> Heatmap:
    raw = np.maximum((weights[:, None, None] * feature_maps).sum(axis=0), 0.0)
    peak = raw.max()
    if peak > 0.0:
        return Heatmap(values=raw / peak, normalized=True)
    return Heatmap(values=raw, normalized=False)


def heatmap(bundle: FeatureMapBundle) -> Heatmap:
    """Grad-CAM++ heatmap, relu-combined and max-normalized to [0, 1]."""
    return _combine(bundle.feature_maps, channel_weights(bundle))


def gradcam_baseline(bundle: FeatureMapBundle) -> Heatmap:
    """Plain Grad-CAM: channel weights are the mean gradient per channel."""
    weights = bundle.gradients.mean(axis=(1, 2))
    return _combine(bundle.feature_maps, weights)


# 5-stop linear colormap: dark blue -> blue -> green -> yellow -> red
_COLOR_STOPS = np.array([
    [0.0, 0, 0, 128],
    [0.25, 0, 0, 255],
    [0.50, 0, 255, 0],
    [0.75, 255, 255, 0],
    [1.0, 255, 0, 0],
])


def colormap(values: np.ndarray) -> np.ndarray:
    """Map heatmap values in [0, 1] to RGB float64 via the 5-stop ramp."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    out = np.zeros(v.shape + (3,), dtype=np.float64)
    stops = _COLOR_STOPS[:, 0]
    for i in range(len(stops) - 1):
        lo, hi = stops[i], stops[i + 1]
        mask = (v >= lo) & (v <= hi) if i == len(stops) - 2 else (v >= lo) & (v < hi)
        if not mask.any():
            continue
        t = (v[mask] - lo) / (hi - lo)
        for c in range(3):
            c_lo = _COLOR_STOPS[i, c + 1]
            c_hi = _COLOR_STOPS[i + 1, c + 1]
            out[..., c][mask] = c_lo + t * (c_hi - c_lo)
    return out


def render_overlay(base: np.ndarray, heat: Heatmap, alpha_blend: float = 0.5) -> np.ndarray:
    """Blend the colormapped heatmap over the base image.

    The heatmap is bilinearly upsampled to the base dimensions, then each
    pixel becomes base*(1-alpha_blend) + color*alpha_blend.
    """
    img = require_image8(base)
    if not 0.0 <= alpha_blend <= 1.0:
        raise ValueError(f"alpha_blend must be in [0, 1], got {alpha_blend}")
    h, w = img.shape[:2]
    values = heat.values
    if values.shape != (h, w):
        values = resize_bilinear_float(values, h, w)
    color = colormap(values)
    out = img.astype(np.float64) * (1.0 - alpha_blend) + color * alpha_blend
    return np.floor(np.clip(out, 0.0, 255.0) + 0.5).astype(np.uint8)


def threshold_boundary(heat: Heatmap, threshold: float = 0.75) -> np.ndarray:
    """Boolean mask of the pixels at the edge of the high-response region
    (heatmap >= threshold); a simple stand-in for an outlined hot zone."""
    hot = heat.values >= threshold
    if not hot.any():
        return np.zeros_like(hot)
    interior = hot.copy()
    interior[1:, :] &= hot[:-1, :]
    interior[:-1, :] &= hot[1:, :]
    interior[:, 1:] &= hot[:, :-1]
    interior[:, :-1] &= hot[:, 1:]
    return hot & ~interior


# ---------------------------------------------------------------------------
# bundle directory format: A.tsr + G.tsr + meta.json {score_s, class_index}


def save_bundle(bundle: FeatureMapBundle, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    tensor_write(bundle.feature_maps.astype(np.float32), d / "A.tsr")
    tensor_write(bundle.gradients.astype(np.float32), d / "G.tsr")
    with open(d / "meta.json", "w") as fh:
        json.dump({"score_s": bundle.score, "class_index": bundle.class_index}, fh)
        fh.write("\n")


def load_bundle(directory) -> FeatureMapBundle:
    d = Path(directory)
    a = tensor_read(d / "A.tsr")
    g = tensor_read(d / "G.tsr")
    with open(d / "meta.json") as fh:
        meta = json.load(fh)
    return FeatureMapBundle(
        feature_maps=a, gradients=g,
        score=float(meta["score_s"]), class_index=int(meta["class_index"]),
    )
