"""Per-frame pixel transforms: BT.709 luma, CIELAB chroma, Sobel gradients
and the 2x box pyramid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import GeometryError

KR, KB = 0.2126, 0.0722
KG = 1.0 - KR - KB

# linear sRGB -> XYZ, D65 white
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65 = _RGB_TO_XYZ.sum(axis=1)


@dataclass(frozen=True)
class PyramidPair:
    full: np.ndarray
    half: np.ndarray


def luma709_rgb(rgb):
    """Y' from gamma-encoded R'G'B' (last axis) with BT.709 weights."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return KR * rgb[..., 0] + KG * rgb[..., 1] + KB * rgb[..., 2]


def luma709(frame):
    """Luma of a decoded frame. YCbCr input already carries Y', so it passes through."""
    return frame.y_plane


def chroma_offset(bit_depth=8):
    return 2 ** (bit_depth - 1) / (2**bit_depth - 1)


def ycbcr_to_rgb(y, cb, cr, bit_depth=8):
    """Full-range BT.709 Y'CbCr (normalized codes) to R'G'B' clipped to [0, 1]."""
    mid = chroma_offset(bit_depth)
    pb = np.asarray(cb) - mid
    pr = np.asarray(cr) - mid
    r = y + 2.0 * (1.0 - KR) * pr
    b = y + 2.0 * (1.0 - KB) * pb
    g = (y - KR * r - KB * b) / KG
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def srgb_to_linear(v):
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(rgb):
    """Gamma-encoded sRGB (last axis) to CIELAB under D65."""
    xyz = srgb_to_linear(rgb) @ _RGB_TO_XYZ.T
    t = xyz / _D65
    eps = (6.0 / 29.0) ** 3
    f = np.where(t > eps, np.cbrt(t), t / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def chroma_from_ab(a, b):
    return np.hypot(a, b)


def rgb_chroma(rgb):
    lab = rgb_to_lab(rgb)
    return chroma_from_ab(lab[..., 1], lab[..., 2])


def chroma_map(frame, bit_depth=8):
    """CIELAB chroma C* = sqrt(a*^2 + b*^2) of a decoded frame."""
    rgb = ycbcr_to_rgb(frame.y_plane, frame.cb_plane, frame.cr_plane, bit_depth)
    return rgb_chroma(rgb)


def gradient_magnitude(field):
    """Sobel gradient magnitude, edge-replicated so the output keeps the input size."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2 or min(field.shape) < 3:
        raise GeometryError(f"gradient needs a field of at least 3x3, got {field.shape}")
    gx = ndimage.sobel(field, axis=1, mode="nearest")
    gy = ndimage.sobel(field, axis=0, mode="nearest")
    return np.hypot(gx, gy)


def downscale2(field):
    """2x2 box average followed by 2x decimation (odd trailing row/column dropped)."""
    field = np.asarray(field, dtype=np.float64)
    h, w = field.shape[-2] // 2, field.shape[-1] // 2
    if h < 1 or w < 1:
        raise GeometryError(f"cannot halve a field of shape {field.shape}")
    f = field[..., : 2 * h, : 2 * w]
    return 0.25 * (f[..., 0::2, 0::2] + f[..., 1::2, 0::2] + f[..., 0::2, 1::2] + f[..., 1::2, 1::2])


def pyramid(field):
    return PyramidPair(np.asarray(field, dtype=np.float64), downscale2(field))
