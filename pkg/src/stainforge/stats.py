"""Per-image stain-style descriptors and dataset-level style fitting.

The style of one image in a given color space is summarized by the
per-channel mean and standard deviation of its planes (population
divisor N: the image's pixels are the whole population).  A dataset's
style is then described by the mean and variance of those per-image
summaries across images (sample divisor n-1: images are a sample),
together with a distribution family used when sampling new styles.
"""
from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import colorspace

FAMILY_KINDS = ("gaussian", "t", "uniform", "laplace")


class MixedColorSpace(ValueError):
    """Raised when one fit receives stats from different color spaces."""


class InsufficientSamples(ValueError):
    """Raised when fewer inputs arrive than the operation needs."""


class EmptyCorpus(ValueError):
    """Raised when a corpus directory yields no usable images."""


class SinkWriteError(RuntimeError):
    """Raised when writing a style export to its sink fails."""


@dataclass(frozen=True)
class DistributionFamily:
    """Marginal family used when sampling styles; moment-matched everywhere.

    ``dof`` only applies to the t family and must exceed 2 so the
    variance exists.
    """

    kind: str
    dof: float = 5.0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {FAMILY_KINDS}")
        if self.kind == "t" and not self.dof > 2.0:
            raise ValueError(f"t family needs dof > 2, got {self.dof}")


GAUSSIAN = DistributionFamily("gaussian")


def _as_vec3(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and standard deviation of one image's planes."""

    space: str
    avg: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "avg", _as_vec3(self.avg, "avg"))
        std = _as_vec3(self.std, "std")
        if np.any(std < 0.0):
            raise ValueError(f"std must be non-negative, got {std}")
        object.__setattr__(self, "std", std)


@dataclass(frozen=True)
class StyleDistribution:
    """Dataset-level style: first two moments of per-image avg and std.

    ``var_of_avg`` and ``var_of_std`` are the diagonals of the
    cross-image covariance (channels treated independently).
    """

    space: str
    mean_of_avg: np.ndarray
    var_of_avg: np.ndarray
    mean_of_std: np.ndarray
    var_of_std: np.ndarray
    family: DistributionFamily = GAUSSIAN
    n_samples: int = 0

    def __post_init__(self):
        for name in ("mean_of_avg", "var_of_avg", "mean_of_std", "var_of_std"):
            object.__setattr__(self, name, _as_vec3(getattr(self, name), name))
        for name in ("var_of_avg", "var_of_std"):
            if np.any(getattr(self, name) < 0.0):
                raise ValueError(f"{name} must be non-negative")
        if self.n_samples < 2 and (np.any(self.var_of_avg > 0) or np.any(self.var_of_std > 0)):
            raise ValueError("nonzero variance claims need n_samples >= 2")

    def with_family(self, family: DistributionFamily) -> "StyleDistribution":
        return StyleDistribution(
            self.space,
            self.mean_of_avg,
            self.var_of_avg,
            self.mean_of_std,
            self.var_of_std,
            family,
            self.n_samples,
        )


def channel_stats(planes: np.ndarray, space: str) -> ChannelStats:
    """Summarize one image's planes as per-channel mean and std (divisor N)."""
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim < 2 or planes.shape[-1] != 3:
        raise ValueError(f"expected planes of shape (..., 3), got {planes.shape}")
    flat = planes.reshape(-1, 3)
    if flat.shape[0] == 0:
        raise ValueError("cannot summarize an empty image")
    # shifted-data moments: exact zeros for constant planes (a plain
    # strided mean can drift by an ulp even over identical values)
    delta = flat - flat[0]
    shift = delta.mean(axis=0)
    var = ((delta - shift) ** 2).mean(axis=0)
    return ChannelStats(space, flat[0] + shift, np.sqrt(var))


class RunningMoments:
    """Single-pass mean/variance accumulator (Welford), vectorized.

    Numerically stable for long streams; ``variance`` uses the sample
    divisor n-1.
    """

    def __init__(self, dim: int = 3):
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    def push(self, x) -> None:
        x = np.asarray(x, dtype=np.float64)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (x - self.mean)

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            raise InsufficientSamples("variance needs at least 2 samples")
        # each m2 increment is non-negative in exact arithmetic; clamp fp dust
        return np.maximum(self._m2 / (self.count - 1), 0.0)


def fit_style_distribution(
    stats: Iterable[ChannelStats],
    family: DistributionFamily = GAUSSIAN,
) -> StyleDistribution:
    """Fit a style distribution from a stream of per-image stats.

    Single pass, constant memory.  All stats must share one color
    space; at least two are required.
    """
    space = None
    acc_avg = RunningMoments()
    acc_std = RunningMoments()
    for s in stats:
        if space is None:
            space = s.space
        elif s.space != space:
            raise MixedColorSpace(f"fit got stats for {s.space!r} after {space!r}")
        acc_avg.push(s.avg)
        acc_std.push(s.std)
    if acc_avg.count < 2:
        raise InsufficientSamples(f"fit needs at least 2 images, got {acc_avg.count}")
    return StyleDistribution(
        space,
        acc_avg.mean,
        acc_avg.variance,
        acc_std.mean,
        acc_std.variance,
        family,
        acc_avg.count,
    )


def fit_arrays(
    images: Iterable[np.ndarray],
    spaces: Sequence[str] = colorspace.COLOR_SPACES,
    family: DistributionFamily = GAUSSIAN,
) -> dict[str, StyleDistribution]:
    """Fit style distributions for several color spaces in one pass.

    ``images`` yields 8-bit RGB arrays; each is converted once per
    requested space.  This is the single fitting core shared by every
    entry point, so identical pixels give identical fits everywhere.
    """
    spaces = tuple(spaces)
    for space in spaces:
        if space not in colorspace.COLOR_SPACES:
            raise ValueError(f"unknown color space {space!r}")
    collected: dict[str, list[ChannelStats]] = {space: [] for space in spaces}
    for img in images:
        for space in spaces:
            planes = colorspace.from_rgb(img, space)
            collected[space].append(channel_stats(planes, space))
    return {space: fit_style_distribution(collected[space], family) for space in spaces}


def subsample_corpus(paths: Sequence, per_class: int, seed: int = 0) -> list:
    """Pick up to ``per_class`` paths per class for faster fitting.

    The class of a path is its parent directory name.  Classes are
    visited in sorted order and candidates are sorted before drawing,
    so the result depends only on the path set and the seed.  Selected
    paths keep their sorted order within each class.
    """
    paths = list(paths)
    if not paths:
        raise EmptyCorpus("no images to subsample")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    groups: dict[str, list] = {}
    for p in paths:
        groups.setdefault(Path(p).parent.name, []).append(p)
    rng = np.random.default_rng(seed)
    picked = []
    for cls in sorted(groups):
        members = sorted(groups[cls], key=str)
        if len(members) <= per_class:
            picked.extend(members)
        else:
            idx = rng.choice(len(members), size=per_class, replace=False)
            picked.extend(members[i] for i in sorted(idx))
    return picked


def export_style_csv(rows: Iterable[tuple[str, ChannelStats]], sink) -> int:
    """Write per-image style rows as CSV to a text sink.

    Each row is (label, stats).  The header names the stats' color
    space, so it is written lazily once the first row arrives; an
    empty stream is an error rather than a bare header.  Returns the
    number of data rows written.
    """
    writer = csv.writer(sink, lineterminator="\n")
    count = 0
    try:
        for label, s in rows:
            if count == 0:
                c1, c2, c3 = _CSV_CHANNELS.get(s.space, ("c1", "c2", "c3"))
                writer.writerow(
                    ["image", "space"]
                    + [f"avg_{c}" for c in (c1, c2, c3)]
                    + [f"std_{c}" for c in (c1, c2, c3)]
                )
            writer.writerow([label, s.space, *s.avg, *s.std])
            count += 1
    except OSError as exc:
        raise SinkWriteError(f"could not write style export: {exc}") from exc
    if count == 0:
        raise InsufficientSamples("no images to export")
    return count


_CSV_CHANNELS = {
    colorspace.LAB: ("l", "a", "b"),
    colorspace.HSV: ("h", "s", "v"),
    colorspace.HED: ("h", "e", "d"),
}
