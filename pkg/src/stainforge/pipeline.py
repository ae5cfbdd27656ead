"""Transform orchestration: mode dispatch, seeding, and batch execution.

Six modes:

``random``
    Pick a color space at random per image, sample a virtual template
    from that space's fitted style, normalize onto it.
``fixed``
    As ``random`` but the space is pinned by config.
``sn``
    Deterministic baseline: normalize onto the fitted style's mean
    template in a pinned space.
``sa1`` / ``sa2``
    Channel-jitter baselines (multiplicative / proportional).
``passthrough``
    Return a copy, untouched.

Batch work derives one independent generator per item from (seed,
item index), so results are byte-identical however many workers run
and in whatever order items complete.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import colorspace
from .augmenters import SA1_SPACES, SA2_SPACES, STRENGTHS, SaConfig, apply_sa
from .normalizer import NormalizeOutcome, normalize_to_template
from .sampler import VirtualTemplate, derive_rng, mean_template, sample_template
from .stats import DistributionFamily, StyleDistribution

RANDOM = "random"
FIXED = "fixed"
SN = "sn"
SA1 = "sa1"
SA2 = "sa2"
PASSTHROUGH = "passthrough"
MODES = (RANDOM, FIXED, SN, SA1, SA2, PASSTHROUGH)

#: Modes that need a fitted style distribution for some space.
STATS_MODES = (RANDOM, FIXED, SN)

_PROB_TOL = 1e-9
_SA_DEFAULT_SPACE = {SA1: colorspace.HED, SA2: colorspace.HSV}


class MissingDistribution(ValueError):
    """Raised when a mode needs a fitted style that the config lacks."""


class BatchItemError(RuntimeError):
    """Wraps a per-item failure inside a batch, carrying the item index."""

    def __init__(self, index: int, message: str):
        super().__init__(f"item {index}: {message}")
        self.index = index


@dataclass
class PipelineConfig:
    """Everything a transform needs besides the image itself.

    ``space_probs`` defaults to uniform over all three spaces and must
    sum to 1 (within 1e-9); it only matters in ``random`` mode.
    ``space`` pins the working space for ``fixed``/``sn`` and
    optionally overrides the scheme default for ``sa1``/``sa2``.
    ``family_override`` swaps the sampling family of every fitted
    style without refitting.  ``shared_template`` makes a whole batch
    reuse one template drawn for item 0 instead of per-item draws.
    """

    mode: str = RANDOM
    distributions: Mapping[str, StyleDistribution] = field(default_factory=dict)
    space_probs: Mapping[str, float] | None = None
    space: str | None = None
    strength: str = "light"
    family_override: DistributionFamily | None = None
    seed: int = 0
    shared_template: bool = False

    def resolved_probs(self) -> dict[str, float]:
        if self.space_probs is None:
            return {space: 1.0 / 3.0 for space in colorspace.COLOR_SPACES}
        return {space: float(self.space_probs.get(space, 0.0)) for space in colorspace.COLOR_SPACES}

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.strength not in STRENGTHS:
            raise ValueError(f"unknown strength {self.strength!r}; expected one of {STRENGTHS}")
        if self.mode == RANDOM:
            probs = self.resolved_probs()
            if self.space_probs is not None:
                unknown = set(self.space_probs) - set(colorspace.COLOR_SPACES)
                if unknown:
                    raise ValueError(f"space_probs has unknown spaces {sorted(unknown)}")
            if any(p < 0.0 for p in probs.values()):
                raise ValueError(f"space probabilities must be non-negative: {probs}")
            if abs(sum(probs.values()) - 1.0) > _PROB_TOL:
                raise ValueError(f"space probabilities must sum to 1: {probs}")
            for space, p in probs.items():
                if p > 0.0 and space not in self.distributions:
                    raise MissingDistribution(
                        f"mode {self.mode!r} can pick {space!r} (p={p}) but no style is fitted for it"
                    )
        elif self.mode in (FIXED, SN):
            if self.space is None:
                raise ValueError(f"mode {self.mode!r} needs a working space")
            if self.space not in colorspace.COLOR_SPACES:
                raise ValueError(f"unknown color space {self.space!r}")
            if self.space not in self.distributions:
                raise MissingDistribution(f"no style fitted for {self.space!r}")
        elif self.mode in (SA1, SA2):
            allowed = SA1_SPACES if self.mode == SA1 else SA2_SPACES
            if self.space is not None and self.space not in allowed:
                raise ValueError(f"mode {self.mode!r} works in {allowed}, got {self.space!r}")

    def _style(self, space: str) -> StyleDistribution:
        try:
            dist = self.distributions[space]
        except KeyError:
            raise MissingDistribution(f"no style fitted for {space!r}") from None
        if self.family_override is not None:
            dist = dist.with_family(self.family_override)
        return dist


def select_color_space(probs: Mapping[str, float], rng: np.random.Generator) -> str:
    """Draw a space with the given probabilities (one uniform draw).

    Cumulative walk in the fixed order lab, hsv, hed, so a generator
    state maps to the same space everywhere.
    """
    u = rng.random()
    acc = 0.0
    last = None
    for space in colorspace.COLOR_SPACES:
        p = probs.get(space, 0.0)
        if p <= 0.0:
            continue
        acc += p
        last = space
        if u < acc:
            return space
    if last is None:
        raise ValueError("no space has positive probability")
    return last


def _draw_template(config: PipelineConfig, rng: np.random.Generator) -> VirtualTemplate:
    if config.mode == FIXED:
        space = config.space
    else:
        space = select_color_space(config.resolved_probs(), rng)
    return sample_template(config._style(space), rng)


def plan_shared_template(config: PipelineConfig, seed: int | None = None) -> VirtualTemplate | None:
    """Template a batch reuses when ``shared_template`` is set, else None.

    Drawn with item 0's generator, so a shared batch of one equals an
    unshared one.
    """
    if not (config.shared_template and config.mode in (RANDOM, FIXED)):
        return None
    base = config.seed if seed is None else seed
    return _draw_template(config, derive_rng(base, 0))


def transform(image: np.ndarray, config: PipelineConfig, rng: np.random.Generator | None = None) -> NormalizeOutcome:
    """Transform one image per the config.

    ``rng`` defaults to the generator derived for item 0 of a batch
    seeded with ``config.seed``, so a lone call equals a batch of one.
    """
    config.validate()
    if rng is None:
        rng = derive_rng(config.seed, 0)
    mode = config.mode
    if mode == PASSTHROUGH:
        return NormalizeOutcome(np.array(image, copy=True), None, 0.0)
    if mode in (SA1, SA2):
        space = config.space or _SA_DEFAULT_SPACE[mode]
        out, clamped = apply_sa(image, SaConfig.preset(mode, space, config.strength), rng)
        return NormalizeOutcome(out, None, clamped)
    if mode == SN:
        return normalize_to_template(image, mean_template(config._style(config.space)))
    return normalize_to_template(image, _draw_template(config, rng))


def transform_batch(
    images: Sequence[np.ndarray],
    config: PipelineConfig,
    seed: int | None = None,
    workers: int = 1,
) -> list[NormalizeOutcome]:
    """Transform a batch; item i uses the generator derived from (seed, i).

    ``seed`` defaults to ``config.seed``.  With ``shared_template``
    set, the template (and space) is drawn once with item 0's
    generator and reused for every item.  Output bytes never depend on
    ``workers``.
    """
    config.validate()
    base = config.seed if seed is None else seed
    images = list(images)
    shared = plan_shared_template(config, base) if images else None

    def run(i: int, image: np.ndarray) -> NormalizeOutcome:
        try:
            if shared is not None:
                return normalize_to_template(image, shared)
            return transform(image, config, derive_rng(base, i))
        except BatchItemError:
            raise
        except Exception as exc:
            raise BatchItemError(i, str(exc)) from exc

    if workers <= 1:
        return [run(i, img) for i, img in enumerate(images)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(images)), images))
