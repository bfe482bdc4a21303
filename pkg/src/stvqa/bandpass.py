"""Spatial divisive normalization (MSCN) and the causal temporal bandpass filter."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import GeometryError, ParameterError

DEFAULT_C = 1.0 / 255.0


@dataclass(frozen=True, eq=False)
class MscnResult:
    mscn: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True, eq=False)
class TemporalKernel:
    taps: np.ndarray
    a: float

    @property
    def P(self):
        return len(self.taps)


@lru_cache(maxsize=16)
def gaussian_window(K: int) -> np.ndarray:
    """1-D factor of the (2K+1)^2 circular Gaussian, sigma = K/3, unit sum."""
    sd = K / 3.0
    x = np.arange(-K, K + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sd) ** 2)
    w /= w.sum()
    w.setflags(write=False)
    return w


def _smooth(field, w):
    # separable: the 2-D window is the outer product of w with itself
    out = ndimage.correlate1d(field, w, axis=-2, mode="nearest")
    return ndimage.correlate1d(out, w, axis=-1, mode="nearest")


def mscn(field, K=3, C=DEFAULT_C) -> MscnResult:
    """Mean-subtracted contrast-normalized coefficients with local mu and sigma.

    Works on a single 2-D field or a stack of fields (leading axes are frames).
    """
    if C <= 0:
        raise ParameterError(f"stabilizing constant must be positive, got {C}")
    field = np.asarray(field, dtype=np.float64)
    if min(field.shape[-2:]) <= 2 * K + 1:
        raise GeometryError(
            f"MSCN window {2 * K + 1}x{2 * K + 1} needs a larger field than {field.shape[-2:]}"
        )
    w = gaussian_window(int(K))
    # centering per frame keeps sigma^2 = E[I^2] - mu^2 well conditioned
    offset = field.mean(axis=(-2, -1), keepdims=True)
    centered = field - offset
    mu_c = _smooth(centered, w)
    var = _smooth(centered * centered, w) - mu_c * mu_c
    sigma = np.sqrt(np.maximum(var, 0.0))
    return MscnResult((centered - mu_c) / (sigma + C), mu_c + offset, sigma)


def temporal_kernel(a=0.5, P=5) -> TemporalKernel:
    """Taps k[n] = n (1 - a n) exp(-2 a n), n = 0..P-1, left unnormalized."""
    if a <= 0:
        raise ParameterError(f"decay parameter must be positive, got {a}")
    if P < 2:
        raise ParameterError(f"kernel needs at least 2 taps, got {P}")
    n = np.arange(P, dtype=np.float64)
    taps = n * (1.0 - a * n) * np.exp(-2.0 * a * n)
    taps.setflags(write=False)
    return TemporalKernel(taps, float(a))


def reflect_pad_past(frames, count):
    """Prepend ``count`` frames mirrored about the first frame edge (x[-1] = x[0])."""
    frames = np.asarray(frames)
    if count == 0:
        return frames
    idx = np.arange(-count, 0)
    # half-sample symmetric reflection, period 2T
    T = frames.shape[0]
    idx = np.mod(idx, 2 * T)
    idx = np.where(idx >= T, 2 * T - 1 - idx, idx)
    return np.concatenate([frames[idx], frames], axis=0)


def temporal_filter(group, kernel: TemporalKernel) -> np.ndarray:
    """Causal convolution along axis 0 with reflective padding at the group start.

    Returns an array with the same shape as ``group`` (T' frames).
    """
    group = np.asarray(group, dtype=np.float64)
    T = group.shape[0]
    P = kernel.P
    if T != P:
        raise GeometryError(f"group has {T} frames but the kernel has {P} taps")
    padded = reflect_pad_past(group, P - 1)
    out = np.zeros_like(group)
    for m, tap in enumerate(kernel.taps):
        if tap == 0.0:
            continue
        out += tap * padded[P - 1 - m : P - 1 - m + T]
    return out


def bandpass_group(frames, K=3, C=DEFAULT_C, kernel=None):
    """MSCN per frame followed by the temporal filter; ``frames`` is (T', H, W)."""
    frames = np.asarray(frames, dtype=np.float64)
    if kernel is None:
        kernel = temporal_kernel(0.5, frames.shape[0])
    return temporal_filter(mscn(frames, K, C).mscn, kernel)
