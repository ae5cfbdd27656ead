"""Stain-style fitting, normalization, and augmentation for histology tiles.

The core idea: summarize every training image's stain style as
per-channel (mean, std) in a perception- or stain-oriented color
space, fit the cross-image distribution of those summaries, then
augment by normalizing each image onto a freshly sampled virtual
style instead of one fixed template.
"""
from .augmenters import SaConfig, apply_sa, sa1, sa2
from .colorspace import COLOR_SPACES, HED, HSV, LAB, OD_MAX, from_rgb, to_rgb
from .normalizer import NormalizeOutcome, normalize_to_template, reinhard_normalize
from .pipeline import (
    MODES,
    BatchItemError,
    MissingDistribution,
    PipelineConfig,
    select_color_space,
    transform,
    transform_batch,
)
from .sampler import VirtualTemplate, derive_rng, mean_template, sample_template
from .stats import (
    ChannelStats,
    DistributionFamily,
    StyleDistribution,
    channel_stats,
    fit_arrays,
    fit_style_distribution,
    subsample_corpus,
)
from .statsfile import dumps_stats, parse_stats, read_stats_file, write_stats_file

__version__ = "0.1.0"

__all__ = [
    "COLOR_SPACES",
    "LAB",
    "HSV",
    "HED",
    "OD_MAX",
    "MODES",
    "BatchItemError",
    "ChannelStats",
    "DistributionFamily",
    "MissingDistribution",
    "NormalizeOutcome",
    "PipelineConfig",
    "SaConfig",
    "StyleDistribution",
    "VirtualTemplate",
    "apply_sa",
    "channel_stats",
    "derive_rng",
    "dumps_stats",
    "fit_arrays",
    "fit_style_distribution",
    "from_rgb",
    "mean_template",
    "normalize_to_template",
    "parse_stats",
    "read_stats_file",
    "reinhard_normalize",
    "sa1",
    "sa2",
    "sample_template",
    "select_color_space",
    "subsample_corpus",
    "to_rgb",
    "transform",
    "transform_batch",
    "write_stats_file",
    "__version__",
]
