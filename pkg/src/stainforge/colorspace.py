"""Color-space kernels for 8-bit RGB histology tiles.

Three working spaces are supported, each chosen so that per-channel
statistics carry stain information:

``lab``
    CIE L*a*b* under a D65 white point, kept in float (L in [0, 100],
    a/b roughly in [-128, 127]).  This is *not* the 8-bit rescaled LAB
    used by some imaging libraries.
``hsv``
    Hexcone HSV with H in [0, 360) degrees and S, V in [0, 1].
``hed``
    Stain concentrations from Ruifrok-Johnston color deconvolution of
    optical densities (hematoxylin, eosin, DAB).  Optical density per
    RGB channel is od = -log10(max(v, 1) / 255), so od lies in
    [0, OD_MAX]; deconvolved concentrations may leave that range for
    colors outside the stain gamut and are intentionally not clipped.

All conversions are pure per-pixel maps over float64 planes.  Arrays
have shape (..., 3); the canonical image shape is (H, W, 3).
"""
from __future__ import annotations

import numpy as np

LAB = "lab"
HSV = "hsv"
HED = "hed"
COLOR_SPACES = (LAB, HSV, HED)

#: Largest representable optical density: -log10(1/255).
OD_MAX = float(-np.log10(1.0 / 255.0))

#: Inclusive (low, high) bounds per channel, used to sanitize sampled
#: template averages.  For HED these bound realistic stain levels, not
#: the full mathematical range of deconvolved values.
CHANNEL_RANGES = {
    LAB: ((0.0, 100.0), (-128.0, 127.0), (-128.0, 127.0)),
    HSV: ((0.0, 360.0), (0.0, 1.0), (0.0, 1.0)),
    HED: ((0.0, OD_MAX), (0.0, OD_MAX), (0.0, OD_MAX)),
}

# sRGB (D65) to XYZ, IEC 61966-2-1.  The white point is taken as the
# row sums of the matrix itself so that RGB (255, 255, 255) maps to
# exactly L = 100, a = b = 0.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_LAB_DELTA = 6.0 / 29.0

#: Ruifrok-Johnston stain vectors (rows: hematoxylin, eosin, DAB),
#: normalized to unit length; row s is the optical-density signature
#: of one unit of stain s.
_STAIN_RGB = np.array(
    [
        [0.65, 0.70, 0.29],
        [0.07, 0.99, 0.11],
        [0.27, 0.57, 0.78],
    ]
)
OD_FROM_STAINS = _STAIN_RGB / np.linalg.norm(_STAIN_RGB, axis=1, keepdims=True)
_STAINS_FROM_OD = np.linalg.inv(OD_FROM_STAINS)


def _as_pixels(arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim < 1 or arr.shape[-1] != 3:
        raise ValueError(f"expected shape (..., 3), got {arr.shape}")
    return arr.astype(np.float64, copy=False)


def quantize_rgb(rgb: np.ndarray) -> tuple[np.ndarray, float]:
    """Round float RGB to uint8 and report the clamped-pixel fraction.

    Rounding is half away from zero.  A pixel counts as clamped only
    if some channel's *rounded* value falls outside [0, 255], so
    float-noise excursions like 255.0000003 do not count.
    """
    rgb = _as_pixels(rgb)
    rounded = np.sign(rgb) * np.floor(np.abs(rgb) + 0.5)
    out_of_range = (rounded < 0.0) | (rounded > 255.0)
    clamped_pixels = np.any(out_of_range, axis=-1)
    n = clamped_pixels.size
    fraction = float(clamped_pixels.sum()) / n if n else 0.0
    return np.clip(rounded, 0.0, 255.0).astype(np.uint8), fraction


def _srgb_to_linear(v: np.ndarray) -> np.ndarray:
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(v: np.ndarray) -> np.ndarray:
    v = np.maximum(v, 0.0)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1.0 / 2.4) - 0.055)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(
        t > _LAB_DELTA**3,
        np.cbrt(t),
        t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0,
    )


def _lab_f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(
        t > _LAB_DELTA,
        t**3,
        3.0 * _LAB_DELTA**2 * (t - 4.0 / 29.0),
    )


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """8-bit RGB (..., 3) to float CIE L*a*b* planes."""
    srgb = _as_pixels(rgb) / 255.0
    xyz = _srgb_to_linear(srgb) @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Float L*a*b* planes back to float RGB in [0, 255] scale (unquantized)."""
    lab = _as_pixels(lab)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = _lab_f_inv(np.stack([fx, fy, fz], axis=-1)) * _WHITE
    return _linear_to_srgb(xyz @ _XYZ_TO_RGB.T) * 255.0


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """8-bit RGB (..., 3) to hexcone HSV: H in [0, 360), S and V in [0, 1]."""
    v01 = _as_pixels(rgb) / 255.0
    r, g, b = v01[..., 0], v01[..., 1], v01[..., 2]
    v = v01.max(axis=-1)
    c = v - v01.min(axis=-1)
    safe_c = np.where(c == 0.0, 1.0, c)
    hr = np.mod((g - b) / safe_c, 6.0)
    hg = (b - r) / safe_c + 2.0
    hb = (r - g) / safe_c + 4.0
    h6 = np.where(v == r, hr, np.where(v == g, hg, hb))
    h = np.where(c == 0.0, 0.0, h6 * 60.0)
    s = np.where(v == 0.0, 0.0, c / np.where(v == 0.0, 1.0, v))
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """HSV planes back to float RGB in [0, 255] scale (unquantized).

    H is taken modulo 360; S and V are clipped to [0, 1] first so that
    slightly out-of-range templates degrade gracefully.
    """
    hsv = _as_pixels(hsv)
    h = np.mod(hsv[..., 0], 360.0) / 60.0
    s = np.clip(hsv[..., 1], 0.0, 1.0)
    v = np.clip(hsv[..., 2], 0.0, 1.0)
    c = v * s
    x = c * (1.0 - np.abs(np.mod(h, 2.0) - 1.0))
    m = v - c
    zero = np.zeros_like(c)
    # float h can land exactly on 6.0 via the mod above; fold back to sector 0
    sector = np.floor(h).astype(np.int64) % 6
    r = np.choose(sector, [c, x, zero, zero, x, c])
    g = np.choose(sector, [x, c, c, x, zero, zero])
    b = np.choose(sector, [zero, zero, x, c, c, x])
    return (np.stack([r, g, b], axis=-1) + m[..., None]) * 255.0


def rgb_to_hed(rgb: np.ndarray) -> np.ndarray:
    """8-bit RGB (..., 3) to stain concentrations (H, E, D planes).

    Intensities are floored at 1 before the log so optical density per
    RGB channel stays within [0, OD_MAX]; deconvolved concentrations
    are left unclipped to keep the map invertible.
    """
    v = np.maximum(_as_pixels(rgb), 1.0)
    od = -np.log10(v / 255.0)
    return od @ _STAINS_FROM_OD


def hed_to_rgb(hed: np.ndarray) -> np.ndarray:
    """Stain concentration planes back to float RGB in [0, 255] scale."""
    od = _as_pixels(hed) @ OD_FROM_STAINS
    return 255.0 * 10.0 ** (-od)


_FORWARD = {LAB: rgb_to_lab, HSV: rgb_to_hsv, HED: rgb_to_hed}
_INVERSE = {LAB: lab_to_rgb, HSV: hsv_to_rgb, HED: hed_to_rgb}


def _check_space(space: str) -> str:
    if space not in COLOR_SPACES:
        raise ValueError(f"unknown color space {space!r}; expected one of {COLOR_SPACES}")
    return space


def from_rgb(rgb: np.ndarray, space: str) -> np.ndarray:
    """Convert an 8-bit RGB image to float planes of the given space."""
    return _FORWARD[_check_space(space)](rgb)


def to_rgb(planes: np.ndarray, space: str) -> np.ndarray:
    """Convert float planes back to a quantized uint8 RGB image."""
    image, _ = to_rgb_with_clamp(planes, space)
    return image


def to_rgb_with_clamp(planes: np.ndarray, space: str) -> tuple[np.ndarray, float]:
    """As :func:`to_rgb`, additionally reporting the clamped-pixel fraction."""
    return quantize_rgb(_INVERSE[_check_space(space)](planes))
