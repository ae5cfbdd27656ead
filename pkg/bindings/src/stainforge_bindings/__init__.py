"""In-process bridge onto the stainforge engine for arrays already in memory.

Training pipelines keep images as numpy arrays; going through image
files and the command line just to fit or apply a stain style would
cost a disk round trip per batch.  This package exposes exactly two
entry points plus a version string:

``py_fit(images, spaces, family, seed)``
    Fit style statistics over a sequence of RGB arrays and return the
    serialized statistics text (the same format the ``stainforge fit``
    command writes).

``py_transform(image, config, seed)``
    Transform one RGB array and return a new array, byte-identical to
    what ``stainforge apply`` would write for the same pixels, config,
    seed, and batch position.

Both functions call straight into the engine's kernels; the bridge
does no pixel math of its own and holds no shared mutable state, so
calls may overlap freely across host threads.  The heavy lifting
happens inside numpy ufuncs and matmuls, which release the
interpreter lock on large arrays, letting data-loader workers overlap.

Input arrays are borrowed, never copied, for the duration of a call:
each must be an H x W x 3 uint8 C-contiguous buffer, and both entry
points validate every array before any kernel runs.  A wrong dtype
raises TypeError; a wrong shape or layout raises ValueError.  Engine
failures (InsufficientSamples, MissingDistribution, stats-file
problems) propagate as the engine's own exception types, which are
ValueError subclasses.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import yaml

from stainforge.colorspace import COLOR_SPACES
from stainforge.pipeline import PipelineConfig, transform
from stainforge.sampler import derive_rng
from stainforge.stats import DistributionFamily, InsufficientSamples, fit_arrays
from stainforge.statsfile import dumps_stats, parse_stats

__version__ = "0.1.0"
__all__ = ["py_fit", "py_transform", "__version__"]

_CONFIG_KEYS = frozenset(
    {"mode", "stats", "space", "space_probs", "strength", "family", "index"}
)


def _check_view(arr, name: str) -> np.ndarray:
    """Validate one borrowed image buffer; returns it uncopied."""
    if not isinstance(arr, np.ndarray):
        raise TypeError(f"{name} must be a numpy array, got {type(arr).__name__}")
    if arr.dtype != np.uint8:
        raise TypeError(f"{name} must have dtype uint8, got {arr.dtype}")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if not arr.flags.c_contiguous:
        raise ValueError(f"{name} must be C-contiguous; pass np.ascontiguousarray(...)")
    return arr


def _as_family(family) -> DistributionFamily:
    if isinstance(family, DistributionFamily):
        return family
    return DistributionFamily(str(family))


def py_fit(images, spaces=COLOR_SPACES, family="gaussian", seed: int = 0) -> str:
    """Fit style statistics over RGB arrays; returns stats-file text.

    Every array is validated before any conversion starts, so a bad
    buffer anywhere in the sequence fails fast with no partial work.
    ``seed`` is reserved for subsampled fitting of labeled corpora;
    plain array sequences are always used in full.  The text is
    exactly what the command-line fit writes for the same pixels.
    """
    views = [_check_view(img, f"images[{i}]") for i, img in enumerate(images)]
    if len(views) < 2:
        raise InsufficientSamples(f"need at least 2 images to fit a style, got {len(views)}")
    del seed  # no class structure to subsample over
    return dumps_stats(fit_arrays(views, spaces=tuple(spaces), family=_as_family(family)))


def _distributions_from(stats):
    """Stats-file text, or a mapping of color space to file-shaped doc."""
    if isinstance(stats, str):
        return parse_stats(stats)
    if isinstance(stats, Mapping):
        unknown = set(stats) - set(COLOR_SPACES)
        if unknown:
            raise ValueError(f"stats mapping has unknown color spaces {sorted(unknown)}")
        docs = [dict(stats[space]) for space in COLOR_SPACES if space in stats]
        return parse_stats(yaml.safe_dump_all(docs))
    raise TypeError(f"stats must be text or a mapping, got {type(stats).__name__}")


def _resolve_probs(space_probs, distributions):
    if space_probs is None:
        if not distributions:
            return None
        # uniform over the fitted spaces (equals the engine default when
        # all three are present)
        return {space: 1.0 / len(distributions) for space in distributions}
    if isinstance(space_probs, Mapping):
        return dict(space_probs)
    probs = list(space_probs)
    if len(probs) != len(COLOR_SPACES):
        raise ValueError(
            f"space_probs sequence must have {len(COLOR_SPACES)} entries in "
            f"{'/'.join(COLOR_SPACES)} order, got {len(probs)}"
        )
    return dict(zip(COLOR_SPACES, (float(p) for p in probs)))


def py_transform(image, config, seed: int = 0) -> np.ndarray:
    """Transform one RGB array; returns a new uint8 array.

    ``config`` is stats-file text (transformed with a template drawn
    from a randomly selected space, the engine default), a mapping of
    color space to file-shaped stats doc, or a mapping with any of the
    keys mode/stats/space/space_probs/strength/family/index.  ``index``
    is the image's batch position; together with ``seed`` it pins the
    random stream, matching how the command line numbers the files it
    processes (sorted by relative path).  Output bytes equal the
    command line's output for the same pixels, config, seed, and
    position.
    """
    _check_view(image, "image")
    mode = "random"
    space = None
    space_probs = None
    strength = "light"
    family = None
    index = 0
    stats = None

    if isinstance(config, str):
        stats = config
    elif isinstance(config, Mapping):
        if set(config) <= set(COLOR_SPACES) and config:
            stats = config
        else:
            unknown = set(config) - _CONFIG_KEYS
            if unknown:
                raise ValueError(f"unknown config keys {sorted(unknown)}")
            mode = config.get("mode", mode)
            stats = config.get("stats")
            space = config.get("space")
            space_probs = config.get("space_probs")
            strength = config.get("strength", strength)
            family = config.get("family")
            index = int(config.get("index", 0))
    else:
        raise TypeError(f"config must be text or a mapping, got {type(config).__name__}")

    distributions = _distributions_from(stats) if stats is not None else {}
    if space_probs is not None:
        probs = _resolve_probs(space_probs, distributions)
    elif mode == "random":
        probs = _resolve_probs(None, distributions)
    else:
        probs = None
    pipeline_config = PipelineConfig(
        mode=mode,
        distributions=distributions,
        space_probs=probs,
        space=space,
        strength=strength,
        family_override=_as_family(family) if family is not None else None,
        seed=seed,
    )
    return transform(image, pipeline_config, derive_rng(seed, index)).image
