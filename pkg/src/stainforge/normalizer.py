"""Template normalization: move an image's channel stats onto a target.

Per channel, every pixel p with source stats (a_i, d_i) is mapped to

    p' = (d_v / d_i) * (p - a_i) + a_v

where (a_v, d_v) are the template's stats.  After the map the image's
channel mean is exactly a_v and its std exactly d_v (up to float
rounding), before requantization to 8-bit RGB.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import colorspace
from .sampler import VirtualTemplate
from .stats import ChannelStats, channel_stats

#: Source stds at or below this are treated as degenerate (constant
#: channel); the channel is then shifted to the template mean without
#: scaling.  Float rounding keeps a truly constant channel's computed
#: std around 1e-16 * |value|, never exactly zero.
DEGENERATE_STD = 1e-9


@dataclass
class NormalizeOutcome:
    """A transformed image plus how it was produced.

    ``template_used`` is None for transforms that do not target a
    template.  ``clamped_fraction`` is the fraction of pixels whose
    rounded RGB left [0, 255] and had to be clamped.
    """

    image: np.ndarray
    template_used: VirtualTemplate | None
    clamped_fraction: float


def normalize_planes(planes: np.ndarray, source: ChannelStats, template: VirtualTemplate) -> np.ndarray:
    """Apply the per-channel affine map in plane space (no quantization)."""
    src_std = source.std
    degenerate = src_std <= DEGENERATE_STD
    scale = np.where(degenerate, 1.0, template.std / np.where(degenerate, 1.0, src_std))
    return (planes - source.avg) * scale + template.avg


def normalize_to_template(
    image: np.ndarray,
    template: VirtualTemplate,
    source_stats: ChannelStats | None = None,
) -> NormalizeOutcome:
    """Normalize an 8-bit RGB image onto a template in the template's space.

    ``source_stats`` may pass in precomputed stats for the image in
    that space; they are computed from the image otherwise.
    """
    space = template.space
    planes = colorspace.from_rgb(image, space)
    if source_stats is None:
        source_stats = channel_stats(planes, space)
    elif source_stats.space != space:
        raise ValueError(
            f"source stats are for {source_stats.space!r} but template is {space!r}"
        )
    shifted = normalize_planes(planes, source_stats, template)
    out, clamped = colorspace.to_rgb_with_clamp(shifted, space)
    return NormalizeOutcome(out, template, clamped)


def reinhard_normalize(image: np.ndarray, template_image: np.ndarray, space: str) -> NormalizeOutcome:
    """Classical stain normalization onto a concrete template image.

    The template image's own channel stats in ``space`` become the
    target; everything else matches :func:`normalize_to_template`.
    """
    ref = channel_stats(colorspace.from_rgb(template_image, space), space)
    template = VirtualTemplate(space, ref.avg, ref.std)
    return normalize_to_template(image, template)
