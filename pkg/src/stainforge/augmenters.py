"""Classical stain augmentation baselines: random channel jitter.

Two schemes, each applied per channel with fresh uniform draws per
image:

multiplicative (``sa1``)
    p' = p * eps1 + eps2, natural in stain concentration (hed) or lab
    space.  eps2 ranges are stored as fractions of the channel's full
    scale and converted to channel units at draw time.
proportional (``sa2``)
    p' = p * (1 + eps), natural in hsv or lab space.

Presets ``light`` and ``strong`` bound the draws; light ranges are
contained in strong ranges and both contain the identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import colorspace

SA1 = "sa1"
SA2 = "sa2"
SCHEMES = (SA1, SA2)
STRENGTHS = ("light", "strong")

SA1_SPACES = (colorspace.HED, colorspace.LAB)
SA2_SPACES = (colorspace.HSV, colorspace.LAB)

PRESET_RANGES = {
    "light": {"eps1": (0.95, 1.05), "eps2": (-0.05, 0.05), "eps": (-0.05, 0.05)},
    "strong": {"eps1": (0.75, 1.25), "eps2": (-0.25, 0.25), "eps": (-0.25, 0.25)},
}


def _channel_scales(space: str) -> np.ndarray:
    ranges = np.asarray(colorspace.CHANNEL_RANGES[space])
    return ranges[:, 1] - ranges[:, 0]


@dataclass(frozen=True)
class SaConfig:
    """One augmentation scheme bound to a space and draw ranges.

    ``eps1_range``/``eps2_range`` drive the multiplicative scheme,
    ``eps_range`` the proportional one; the irrelevant ranges are
    ignored.  Every range must contain the scheme's identity (1 for
    eps1, 0 for the others).
    """

    scheme: str
    space: str
    strength: str = "light"
    eps1_range: tuple[float, float] = PRESET_RANGES["light"]["eps1"]
    eps2_range: tuple[float, float] = PRESET_RANGES["light"]["eps2"]
    eps_range: tuple[float, float] = PRESET_RANGES["light"]["eps"]

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        allowed = SA1_SPACES if self.scheme == SA1 else SA2_SPACES
        if self.space not in allowed:
            raise ValueError(f"scheme {self.scheme!r} works in {allowed}, got {self.space!r}")
        for name, identity in (("eps1_range", 1.0), ("eps2_range", 0.0), ("eps_range", 0.0)):
            lo, hi = getattr(self, name)
            if not (lo <= identity <= hi):
                raise ValueError(f"{name} must contain {identity}, got ({lo}, {hi})")

    @classmethod
    def preset(cls, scheme: str, space: str, strength: str = "light") -> "SaConfig":
        if strength not in STRENGTHS:
            raise ValueError(f"unknown strength {strength!r}; expected one of {STRENGTHS}")
        r = PRESET_RANGES[strength]
        return cls(scheme, space, strength, r["eps1"], r["eps2"], r["eps"])


def apply_multiplicative(planes: np.ndarray, eps1: np.ndarray, eps2: np.ndarray) -> np.ndarray:
    """p' = p * eps1 + eps2 per channel; eps2 already in channel units."""
    return planes * np.asarray(eps1) + np.asarray(eps2)


def apply_proportional(planes: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """p' = p * (1 + eps) per channel."""
    return planes * (1.0 + np.asarray(eps))


def apply_sa(image: np.ndarray, config: SaConfig, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Jitter one image per ``config``; returns (image, clamped fraction).

    Draw order is fixed: for sa1 the eps1 vector then the eps2 vector
    (each one uniform draw per channel), for sa2 a single eps vector.
    """
    planes = colorspace.from_rgb(image, config.space)
    if config.scheme == SA1:
        eps1 = rng.uniform(*config.eps1_range, size=3)
        eps2 = rng.uniform(*config.eps2_range, size=3) * _channel_scales(config.space)
        shifted = apply_multiplicative(planes, eps1, eps2)
    else:
        eps = rng.uniform(*config.eps_range, size=3)
        shifted = apply_proportional(planes, eps)
    return colorspace.to_rgb_with_clamp(shifted, config.space)


def sa1(image: np.ndarray, rng: np.random.Generator, space: str = colorspace.HED, strength: str = "light") -> np.ndarray:
    """Multiplicative jitter with preset ranges; returns the image only."""
    img, _ = apply_sa(image, SaConfig.preset(SA1, space, strength), rng)
    return img


def sa2(image: np.ndarray, rng: np.random.Generator, space: str = colorspace.HSV, strength: str = "light") -> np.ndarray:
    """Proportional jitter with preset ranges; returns the image only."""
    img, _ = apply_sa(image, SaConfig.preset(SA2, space, strength), rng)
    return img
