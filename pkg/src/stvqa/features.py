"""Natural-statistics feature blocks: spatial moment/AGGD blocks, std pooling
and the chip blocks."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import statfits
from .bandpass import DEFAULT_C, mscn
from .errors import DegenerateDistributionError, GeometryError
from .pixelmath import downscale2, gradient_magnitude

MOMENT_SENTINEL = (2.0, 0.0, 0.0, 3.0)  # shape, scale, skew, kurt

SPATIAL_KINDS = ("ggd", "sigma", "gradient")


@dataclass(frozen=True, eq=False)
class PairedProducts:
    H: np.ndarray
    V: np.ndarray
    D1: np.ndarray
    D2: np.ndarray

    def __iter__(self):
        return iter((self.H, self.V, self.D1, self.D2))


class SentinelLog(Counter):
    """Counts sentinel substitutions per feature block."""

    def messages(self):
        return [f"{block}: {n} degenerate fit(s) replaced by sentinel" for block, n in sorted(self.items())]


def paired_products(field) -> PairedProducts:
    """One-pixel neighbour products: right, down, down-right and down-left."""
    s = np.asarray(field, dtype=np.float64)
    if min(s.shape) < 2:
        raise GeometryError(f"paired products need at least 2x2, got {s.shape}")
    return PairedProducts(
        s[:, :-1] * s[:, 1:],
        s[:-1, :] * s[1:, :],
        s[:-1, :-1] * s[1:, 1:],
        s[:-1, 1:] * s[1:, :-1],
    )


def moment_features(values, log=None, block=""):
    """(GGD shape, GGD scale, skewness, kurtosis), or the sentinel if degenerate."""
    try:
        g = statfits.fit_ggd(values)
    except DegenerateDistributionError:
        if log is not None:
            log[block] += 1
        return MOMENT_SENTINEL
    m = statfits.moments(values)
    return (g.alpha, g.sigma2, m.skewness, m.kurtosis)


def ggd_features(values, log=None, block=""):
    try:
        g = statfits.fit_ggd(values)
    except DegenerateDistributionError:
        if log is not None:
            log[block] += 1
        g = statfits.GGD_SENTINEL
    return (g.alpha, g.sigma2)


def aggd_features(values, log=None, block=""):
    try:
        p = statfits.fit_aggd(values)
    except DegenerateDistributionError:
        if log is not None:
            log[block] += 1
        p = statfits.AGGD_SENTINEL
    return p.as_tuple()


def product_features(field, log=None, block=""):
    """4 AGGD parameters for each of the 4 paired products (16 values)."""
    out = []
    for prod in paired_products(field):
        out.extend(aggd_features(prod, log, block))
    return out


def spatial_row(field, kind, K=3, C=DEFAULT_C, log=None, block=""):
    """Per-frame values of one spatial block at both scales (8 or 32 reals).

    kind ``ggd``: MSCN of the map -> moment features.
    kind ``sigma``: local sigma of the map -> its MSCN -> moment features.
    kind ``gradient``: ``field`` is luma; Sobel magnitude at each scale
    (luma is halved before the Sobel) -> MSCN -> paired-product AGGD.
    """
    full = np.asarray(field, dtype=np.float64)
    row = []
    for scaled in (full, downscale2(full)):
        if kind == "ggd":
            row.extend(moment_features(mscn(scaled, K, C).mscn, log, block))
        elif kind == "sigma":
            sigma = mscn(scaled, K, C).sigma
            row.extend(moment_features(mscn(sigma, K, C).mscn, log, block))
        elif kind == "gradient":
            grad = gradient_magnitude(scaled)
            row.extend(product_features(mscn(grad, K, C).mscn, log, block))
        else:
            raise ValueError(f"unknown spatial block kind {kind!r}")
    return np.array(row)


def spatial_rows(fields, kind, K=3, C=DEFAULT_C, log=None, block=""):
    return np.array([spatial_row(f, kind, K, C, log, block) for f in fields])


def block_spatial(fields, kind, K=3, C=DEFAULT_C, log=None, block=""):
    """Frame average of a spatial block."""
    if len(fields) < 1:
        raise ValueError("need at least one frame")
    return spatial_rows(fields, kind, K, C, log, block).mean(axis=0)


def block_stdpool(rows, group_size=5):
    """Population std over each non-overlapping group of frames, averaged over groups.

    ``rows`` is (n_frames, n_features); trailing frames that do not fill a
    group are ignored.
    """
    rows = np.asarray(rows, dtype=np.float64)
    n_groups = rows.shape[0] // group_size
    if n_groups < 1:
        raise ValueError(f"need at least {group_size} frames to pool, got {rows.shape[0]}")
    grouped = rows[: n_groups * group_size].reshape(n_groups, group_size, -1)
    return grouped.std(axis=1).mean(axis=0)


def chip_row(chip_values, log=None, block=""):
    """GGD (shape, scale) of a chip mosaic plus its paired-product AGGD (18 reals)."""
    return np.array([*ggd_features(chip_values, log, block), *product_features(chip_values, log, block)])


def block_chip(chip_frames_s1, chip_frames_s2, log=None, block=""):
    """Group-averaged chip features at both scales (36 reals)."""
    if not chip_frames_s1 or not chip_frames_s2:
        raise ValueError("need at least one chip frame per scale")
    parts = []
    for frames in (chip_frames_s1, chip_frames_s2):
        rows = [chip_row(getattr(cf, "values", cf), log, block) for cf in frames]
        parts.append(np.mean(rows, axis=0))
    return np.concatenate(parts)
