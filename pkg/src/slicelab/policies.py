"""Randomized augmentation policy samplers and their grid-search spaces.

Four policy variants are supported:

RA      N transforms drawn uniformly (with replacement) from the original
        16-kind space, all at a fixed level M.
RA23    same, over the full 23-kind space.
RRA23   as RA23, but each instance's level is an integer drawn uniformly
        from [m_lo, m_hi].
TRRA    two-stage: n_color draws from the 13 photometric kinds and
        n_shape draws from the 10 geometric kinds (levels as RRA23), then
        each drawn instance is independently executed with probability p
        (with probability 1 - p it is dropped and leaves the image
        unchanged).

Sampling is with replacement everywhere (one draw may repeat a kind), and
levels, signs, aux parameters and the execution coin are drawn per
instance in a fixed order, so a (spec, rng-stream) pair always yields the
same policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng
from .transforms import (
    BASE16_KINDS,
    COLOR_KINDS,
    KINDS,
    SHAPE_KINDS,
    MAX_LEVEL,
    TransformInstance,
    apply_transform,
    realize,
)

VARIANTS = ("RA", "RA23", "RRA23", "TRRA")


class PolicyError(ValueError):
    """Invalid policy specification."""


@dataclass(frozen=True)
class PolicySpec:
    """Hyperparameters of one policy; unused fields stay None.

    RA / RA23 use (n, m); RRA23 uses (n, m_lo, m_hi); TRRA uses
    (n_color, n_shape, m_lo, m_hi, p).
    """

    variant: str
    n: int | None = None
    m: int | None = None
    m_lo: int | None = None
    m_hi: int | None = None
    n_color: int | None = None
    n_shape: int | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise PolicyError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.variant in ("RA", "RA23"):
            self._need("n", "m")
            self._check_level(self.m, "m")
            if self.n < 0:
                raise PolicyError(f"n must be >= 0, got {self.n}")
        elif self.variant == "RRA23":
            self._need("n", "m_lo", "m_hi")
            self._check_level_pair()
            if self.n < 0:
                raise PolicyError(f"n must be >= 0, got {self.n}")
        else:  # TRRA
            self._need("n_color", "n_shape", "m_lo", "m_hi", "p")
            self._check_level_pair()
            if not 0 <= self.n_color <= len(COLOR_KINDS):
                raise PolicyError(f"n_color must be in [0, {len(COLOR_KINDS)}], got {self.n_color}")
            if not 0 <= self.n_shape <= len(SHAPE_KINDS):
                raise PolicyError(f"n_shape must be in [0, {len(SHAPE_KINDS)}], got {self.n_shape}")
            if not 0.0 <= self.p <= 1.0:
                raise PolicyError(f"p must be in [0, 1], got {self.p}")

    def _need(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise PolicyError(f"{self.variant} requires field {name!r}")

    @staticmethod
    def _check_level(value: int, name: str) -> None:
        if not 0 <= value <= MAX_LEVEL:
            raise PolicyError(f"{name} must be in [0, {MAX_LEVEL}], got {value}")

    def _check_level_pair(self) -> None:
        self._check_level(self.m_lo, "m_lo")
        self._check_level(self.m_hi, "m_hi")
        if self.m_lo > self.m_hi:
            raise PolicyError(f"m_lo {self.m_lo} exceeds m_hi {self.m_hi}")

    def to_json(self) -> dict:
        out = {"variant": self.variant}
        for key in ("n", "m", "m_lo", "m_hi", "n_color", "n_shape", "p"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PolicySpec":
        known = {"variant", "n", "m", "m_lo", "m_hi", "n_color", "n_shape", "p"}
        extra = set(obj) - known
        if extra:
            raise PolicyError(f"unknown policy fields {sorted(extra)}")
        if "variant" not in obj:
            raise PolicyError("policy JSON requires a 'variant' field")
        return cls(**obj)


def search_space(spec: PolicySpec):
    """The kind pool a variant samples from (RA: the original 16 kinds)."""
    return BASE16_KINDS if spec.variant == "RA" else KINDS


def _draw_level(spec: PolicySpec, rng: Rng) -> int:
    if spec.variant in ("RA", "RA23"):
        return spec.m
    return rng.randint(spec.m_lo, spec.m_hi)


def sample_policy_stages(
    spec: PolicySpec, rng: Rng
) -> tuple[list[TransformInstance], list[TransformInstance]]:
    """Sample one policy, returning (drawn, executed) instance lists.

    For RA/RA23/RRA23 the two lists are identical.  For TRRA ``drawn``
    holds the n_color + n_shape pre-retention draws in stage order (color
    stage first) and ``executed`` the subset that survived the per-instance
    execution coin.
    """
    drawn: list[TransformInstance] = []
    if spec.variant == "TRRA":
        for pool, count in ((COLOR_KINDS, spec.n_color), (SHAPE_KINDS, spec.n_shape)):
            for _ in range(count):
                kind = rng.choice(pool)
                drawn.append(realize(kind, _draw_level(spec, rng), rng))
        executed = [t for t in drawn if rng.random() < spec.p]
        return drawn, executed
    pool = search_space(spec)
    for _ in range(spec.n):
        kind = rng.choice(pool)
        drawn.append(realize(kind, _draw_level(spec, rng), rng))
    return drawn, list(drawn)


def sample_policy(spec: PolicySpec, rng: Rng) -> list[TransformInstance]:
    """Sample the transform sequence to execute for one image."""
    return sample_policy_stages(spec, rng)[1]


def augment(img: np.ndarray, spec: PolicySpec, rng: Rng) -> np.ndarray:
    """Sample a policy and apply its instances sequentially in draw order."""
    out = img
    for t in sample_policy(spec, rng):
        out = apply_transform(out, t)
    return out if out is not img else img.copy()


_N_GRID = range(1, 9)
_M_GRID = (5, 10, 15, 20, 25, 30)
_X_GRID = (10, 15, 20, 25, 30)
_P_GRID = (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
_TRRA_TOTAL = 7


def grid_enumerate(variant: str) -> list[PolicySpec]:
    """Enumerate the full hyperparameter grid for one variant.

    RA / RA23: n in 1..8 crossed with m in {5,...,30 step 5} -> 48 specs.
    RRA23: n in 1..8 crossed with m_hi in {10,...,30 step 5}, m_lo=5 -> 40.
    TRRA: n_color in 1..6 with n_shape = 7 - n_color, level range [5, 30],
    p in {0.1, 0.3, 0.5, 0.7, 0.9, 1} -> 36 specs.
    """
    if variant in ("RA", "RA23"):
        return [PolicySpec(variant, n=n, m=m) for n in _N_GRID for m in _M_GRID]
    if variant == "RRA23":
        return [PolicySpec(variant, n=n, m_lo=5, m_hi=x) for n in _N_GRID for x in _X_GRID]
    if variant == "TRRA":
        return [
            PolicySpec(variant, n_color=nc, n_shape=_TRRA_TOTAL - nc,
                       m_lo=5, m_hi=30, p=p)
            for nc in range(1, _TRRA_TOTAL)
            for p in _P_GRID
        ]
    raise PolicyError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
