"""A minimal analytically differentiated reference network.

Structure: one valid-padding 3x3 convolution (3 input channels, K output
channels) -> relu -> global average pool -> linear head with 2 outputs.
Because the head is linear over pooled features, the gradient of a class
score w.r.t. the post-relu feature map is the constant head weight divided
by the feature area, which makes the network an exact, framework-free
source of feature-map/gradient bundles for the heatmap code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gradcampp import FeatureMapBundle
from .rng import Rng
from .tensors import tensor_read, tensor_write


@dataclass(frozen=True)
class RefNetParams:
    kernels: np.ndarray      # (K, 3, 3, 3): out-channel, in-channel, ky, kx
    conv_bias: np.ndarray    # (K,)
    head_weight: np.ndarray  # (2, K)
    head_bias: np.ndarray    # (2,)

    def __post_init__(self) -> None:
        k = np.asarray(self.kernels, dtype=np.float64)
        if k.ndim != 4 or k.shape[1:] != (3, 3, 3) or k.shape[0] < 1:
            raise ValueError(f"kernels must be (K, 3, 3, 3), got {k.shape}")
        cb = np.asarray(self.conv_bias, dtype=np.float64)
        hw = np.asarray(self.head_weight, dtype=np.float64)
        hb = np.asarray(self.head_bias, dtype=np.float64)
        if cb.shape != (k.shape[0],) or hw.shape != (2, k.shape[0]) or hb.shape != (2,):
            raise ValueError("parameter shapes are inconsistent")
        for arr in (k, cb, hw, hb):
            if not np.isfinite(arr).all():
                raise ValueError("parameters contain non-finite values")
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "conv_bias", cb)
        object.__setattr__(self, "head_weight", hw)
        object.__setattr__(self, "head_bias", hb)

    @property
    def channels(self) -> int:
        return self.kernels.shape[0]


def init_params(channels: int, seed: int) -> RefNetParams:
    """Deterministic uniform [-0.5, 0.5] initialization from a seeded stream."""
    if channels < 1:
        raise ValueError(f"channels must be >= 1, got {channels}")
    rng = Rng.derive(seed)

    def draw(shape):
        flat = np.array([rng.random() - 0.5 for _ in range(int(np.prod(shape)))])
        return flat.reshape(shape)

    return RefNetParams(
        kernels=draw((channels, 3, 3, 3)),
        conv_bias=draw((channels,)),
        head_weight=draw((2, channels)),
        head_bias=draw((2,)),
    )


def forward(params: RefNetParams, x: np.ndarray) -> tuple[np.ndarray, tuple[float, float]]:
    """Run the network on a (3, H, W) input.

    Returns the post-relu feature maps A of shape (K, H-2, W-2) and the
    two class scores S_c = sum_k head[c, k] * mean(A_k) + head_bias[c].
    """
    inp = np.asarray(x, dtype=np.float64)
    if inp.ndim != 3 or inp.shape[0] != 3:
        raise ValueError(f"input must be (3, H, W), got {inp.shape}")
    h, w = inp.shape[1:]
    if h < 3 or w < 3:
        raise ValueError(f"input spatial dims must be >= 3, got {h}x{w}")
    oh, ow = h - 2, w - 2
    pre = np.zeros((params.channels, oh, ow))
    for ky in range(3):
        for kx in range(3):
            patch = inp[:, ky:ky + oh, kx:kx + ow]          # (3, oh, ow)
            pre += np.einsum("kc,cij->kij", params.kernels[:, :, ky, kx], patch)
    pre += params.conv_bias[:, None, None]
    feature_maps = np.maximum(pre, 0.0)
    pooled = feature_maps.mean(axis=(1, 2))
    scores = params.head_weight @ pooled + params.head_bias
    return feature_maps, (float(scores[0]), float(scores[1]))


def backward_feature_grad(
    params: RefNetParams, feature_maps: np.ndarray, class_index: int
) -> np.ndarray:
    """Analytic dS_c/dA: head[c, k] / feature_area, constant per channel."""
    if class_index not in (0, 1):
        raise ValueError(f"class_index must be 0 or 1, got {class_index}")
    a = np.asarray(feature_maps, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] != params.channels:
        raise ValueError(f"feature maps must be (K, H, W) with K={params.channels}")
    area = a.shape[1] * a.shape[2]
    per_channel = params.head_weight[class_index] / area
    return np.broadcast_to(per_channel[:, None, None], a.shape).copy()


def make_bundle(params: RefNetParams, x: np.ndarray, class_index: int | None = None) -> FeatureMapBundle:
    """Forward + backward pass packaged for the heatmap code; the class
    defaults to the argmax score."""
    feature_maps, scores = forward(params, x)
    if class_index is None:
        class_index = 1 if scores[1] > scores[0] else 0
    grads = backward_feature_grad(params, feature_maps, class_index)
    return FeatureMapBundle(
        feature_maps=feature_maps,
        gradients=grads,
        score=scores[class_index],
        class_index=class_index,
    )


# ---------------------------------------------------------------------------
# parameter directory format: four TSR1 files + meta.json


_PARAM_FILES = {
    "kernels": "kernels.tsr",
    "conv_bias": "conv_bias.tsr",
    "head_weight": "head_weight.tsr",
    "head_bias": "head_bias.tsr",
}


def save_params(params: RefNetParams, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for attr, name in _PARAM_FILES.items():
        tensor_write(getattr(params, attr).astype(np.float32), d / name)
    with open(d / "meta.json", "w") as fh:
        json.dump({"channels": params.channels}, fh)
        fh.write("\n")


def load_params(directory) -> RefNetParams:
    d = Path(directory)
    arrays = {attr: tensor_read(d / name) for attr, name in _PARAM_FILES.items()}
    return RefNetParams(**arrays)
