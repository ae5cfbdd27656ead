"""On-disk stain-style statistics: multi-document YAML, one doc per space.

Each document stores the fitted style for one color space: means of
per-image avg/std under ``mean`` and their cross-image standard
deviations (square roots of the variance diagonal) under ``std``.
Floats carry 9 significant digits.  ``lab_variant``/``hed_matrix``
pin the conversion conventions the numbers were produced under, and a
reader rejects files claiming conventions it does not implement, as
well as unknown keys and version mismatches.
"""
from __future__ import annotations

import io
import math
from collections.abc import Mapping
from pathlib import Path

import numpy as np
import yaml

from . import colorspace
from .stats import FAMILY_KINDS, DistributionFamily, StyleDistribution

STATS_FILE_VERSION = 1
LAB_VARIANT = "cie-d65"
HED_MATRIX = "ruifrok-johnston"

_DOC_KEYS = {"version", "color_space", "family", "n_samples", "avg", "std", "lab_variant", "hed_matrix"}
_MOMENT_KEYS = {"mean", "std"}

_HEADER = """\
# stain style statistics (stainforge stats file, version 1)
# lab numbers are float CIE L*a*b* under D65 (lab_variant cie-d65), not the
# 8-bit rescaled lab variant some imaging libraries produce; hed numbers use
# the ruifrok-johnston stain matrix.  one yaml document per color space.
"""


class StatsFileError(ValueError):
    """Raised for malformed, unknown-key, or wrong-version stats files."""


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise StatsFileError(f"cannot serialize non-finite value {x}")
    return format(x, ".9g")


def _fmt_vec(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def dumps_stats(dists: Mapping[str, StyleDistribution]) -> str:
    """Serialize fitted styles to stats-file text (spaces in fixed order)."""
    unknown = set(dists) - set(colorspace.COLOR_SPACES)
    if unknown:
        raise StatsFileError(f"unknown color spaces {sorted(unknown)}")
    out = io.StringIO()
    out.write(_HEADER)
    for space in colorspace.COLOR_SPACES:
        if space not in dists:
            continue
        d = dists[space]
        if d.space != space:
            raise StatsFileError(f"distribution under key {space!r} is for {d.space!r}")
        out.write("---\n")
        out.write(f"version: {STATS_FILE_VERSION}\n")
        out.write(f"color_space: {space}\n")
        out.write(f"family: {d.family.kind}\n")
        out.write(f"n_samples: {int(d.n_samples)}\n")
        out.write(
            f"avg: {{ mean: {_fmt_vec(d.mean_of_avg)}, std: {_fmt_vec(np.sqrt(d.var_of_avg))} }}\n"
        )
        out.write(
            f"std: {{ mean: {_fmt_vec(d.mean_of_std)}, std: {_fmt_vec(np.sqrt(d.var_of_std))} }}\n"
        )
        out.write(f"lab_variant: {LAB_VARIANT}\n")
        out.write(f"hed_matrix: {HED_MATRIX}\n")
    return out.getvalue()


def write_stats_file(path, dists: Mapping[str, StyleDistribution]) -> None:
    Path(path).write_text(dumps_stats(dists), encoding="utf-8")


def _vec3(doc_part, what: str) -> np.ndarray:
    if not isinstance(doc_part, list) or len(doc_part) != 3:
        raise StatsFileError(f"{what} must be a list of 3 numbers")
    try:
        arr = np.array([float(v) for v in doc_part])
    except (TypeError, ValueError) as exc:
        raise StatsFileError(f"{what} must be numeric: {exc}") from exc
    if not np.all(np.isfinite(arr)):
        raise StatsFileError(f"{what} must be finite")
    return arr


def _moments(doc_part, what: str) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(doc_part, dict):
        raise StatsFileError(f"{what} must be a mapping with keys mean, std")
    extra = set(doc_part) - _MOMENT_KEYS
    missing = _MOMENT_KEYS - set(doc_part)
    if extra or missing:
        raise StatsFileError(f"{what} must have exactly keys mean, std")
    mean = _vec3(doc_part["mean"], f"{what}.mean")
    std = _vec3(doc_part["std"], f"{what}.std")
    if np.any(std < 0.0):
        raise StatsFileError(f"{what}.std entries must be non-negative")
    return mean, std


def parse_stats(text: str) -> dict[str, StyleDistribution]:
    """Parse stats-file text, validating schema, version, and conventions."""
    try:
        docs = [d for d in yaml.safe_load_all(text) if d is not None]
    except yaml.YAMLError as exc:
        raise StatsFileError(f"not valid yaml: {exc}") from exc
    if not docs:
        raise StatsFileError("stats file contains no documents")
    result: dict[str, StyleDistribution] = {}
    for doc in docs:
        if not isinstance(doc, dict):
            raise StatsFileError(f"expected a mapping per document, got {type(doc).__name__}")
        extra = set(doc) - _DOC_KEYS
        if extra:
            raise StatsFileError(f"unknown keys {sorted(extra)}")
        missing = _DOC_KEYS - set(doc)
        if missing:
            raise StatsFileError(f"missing keys {sorted(missing)}")
        if doc["version"] != STATS_FILE_VERSION:
            raise StatsFileError(
                f"version mismatch: file has {doc['version']!r}, reader supports {STATS_FILE_VERSION}"
            )
        if doc["lab_variant"] != LAB_VARIANT:
            raise StatsFileError(f"unsupported lab_variant {doc['lab_variant']!r}")
        if doc["hed_matrix"] != HED_MATRIX:
            raise StatsFileError(f"unsupported hed_matrix {doc['hed_matrix']!r}")
        space = doc["color_space"]
        if space not in colorspace.COLOR_SPACES:
            raise StatsFileError(f"unknown color_space {space!r}")
        if space in result:
            raise StatsFileError(f"duplicate document for color_space {space!r}")
        if doc["family"] not in FAMILY_KINDS:
            raise StatsFileError(f"unknown family {doc['family']!r}")
        n = doc["n_samples"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise StatsFileError(f"n_samples must be a non-negative integer, got {n!r}")
        avg_mean, avg_std = _moments(doc["avg"], "avg")
        std_mean, std_std = _moments(doc["std"], "std")
        try:
            result[space] = StyleDistribution(
                space,
                avg_mean,
                avg_std**2,
                std_mean,
                std_std**2,
                DistributionFamily(doc["family"]),
                n,
            )
        except ValueError as exc:
            raise StatsFileError(str(exc)) from exc
    return result


def read_stats_file(path) -> dict[str, StyleDistribution]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StatsFileError(f"cannot read stats file {path}: {exc}") from exc
    return parse_stats(text)
