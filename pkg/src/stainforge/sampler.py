"""Virtual stain-template sampling from a fitted style distribution.

A virtual template is one (avg, std) pair per channel, drawn around
the dataset-level means with the dataset-level variances.  All
families are moment-matched: whatever the family, a sampled component
has mean = location and variance = scale**2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import colorspace
from .stats import DistributionFamily, StyleDistribution

#: Floor applied to sampled template stds so downstream scaling never
#: divides by (or collapses to) zero.
EPS_STD = 1e-3


@dataclass(frozen=True)
class VirtualTemplate:
    """Target per-channel stats a normalization maps an image onto."""

    space: str
    avg: np.ndarray
    std: np.ndarray


def derive_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for item ``index`` of a batch seeded with ``seed``.

    Built on SeedSequence spawn keys, so streams for different indices
    never overlap and the result is identical however the batch is
    scheduled.
    """
    entropy = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy, spawn_key=(int(index),)))


def sample_scalar(family: DistributionFamily, location: float, scale: float, rng: np.random.Generator) -> float:
    """One moment-matched draw: mean ``location``, std ``scale``.

    A zero scale returns the location exactly (no draw is consumed).
    """
    if scale < 0.0:
        raise ValueError(f"scale must be non-negative, got {scale}")
    if scale == 0.0:
        return float(location)
    if family.kind == "gaussian":
        return float(location + scale * rng.standard_normal())
    if family.kind == "t":
        # standard t has variance dof/(dof-2); shrink so the draw's std is scale
        return float(location + scale * math.sqrt((family.dof - 2.0) / family.dof) * rng.standard_t(family.dof))
    if family.kind == "uniform":
        half = math.sqrt(3.0) * scale
        return float(rng.uniform(location - half, location + half))
    return float(rng.laplace(location, scale / math.sqrt(2.0)))


def _sanitize(space: str, avg: np.ndarray, std: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ranges = np.asarray(colorspace.CHANNEL_RANGES[space])
    avg = np.clip(avg, ranges[:, 0], ranges[:, 1])
    std = np.maximum(std, EPS_STD)
    return avg, std


def sample_template(dist: StyleDistribution, rng: np.random.Generator) -> VirtualTemplate:
    """Draw one virtual template from a fitted style distribution.

    Draw order is fixed (avg channels 0..2, then std channels 0..2) so
    a given generator state always yields the same template.  Sampled
    averages are clamped to the channel ranges and stds floored at
    ``EPS_STD``.
    """
    avg = np.array(
        [
            sample_scalar(dist.family, m, math.sqrt(v), rng)
            for m, v in zip(dist.mean_of_avg, dist.var_of_avg)
        ]
    )
    std = np.array(
        [
            sample_scalar(dist.family, m, math.sqrt(v), rng)
            for m, v in zip(dist.mean_of_std, dist.var_of_std)
        ]
    )
    avg, std = _sanitize(dist.space, avg, std)
    return VirtualTemplate(dist.space, avg, std)


def mean_template(dist: StyleDistribution) -> VirtualTemplate:
    """The distribution's own mean style as a template (no randomness).

    Identical to :func:`sample_template` when every variance is zero,
    including the sanitation step, so the two paths agree exactly.
    """
    avg, std = _sanitize(dist.space, np.asarray(dist.mean_of_avg), np.asarray(dist.mean_of_std))
    return VirtualTemplate(dist.space, avg, std)
