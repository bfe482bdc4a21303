"""Space-time chip search: per-window orientation selection by kurtosis.

For every R x R window on a stride-(D*R) grid, Q candidate chips are cut
through the R bandpassed frames along lines at angles q*pi/Q passing through
the window centre. Chip row m is frame m of the group sampled along the line.
The candidate whose sample kurtosis is closest to 3 wins, and winners are
tiled row-major into an aggregated mosaic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ParameterError
from .statfits import DEGENERATE_VARIANCE


def round_half_away(x):
    # the slack absorbs trig error, e.g. cos(2*pi/3) = -0.4999999999999998
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5 + 1e-9)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ChipLut:
    Q: int
    R: int
    dx: np.ndarray  # (Q, R) column offsets
    dy: np.ndarray  # (Q, R) row offsets

    @property
    def angles(self):
        return np.arange(self.Q) * np.pi / self.Q

    def offsets(self, q):
        return list(zip(self.dx[q].tolist(), self.dy[q].tolist()))


@dataclass(frozen=True, eq=False)
class ChipFrame:
    values: np.ndarray
    angle_index: np.ndarray  # (rows, cols) of windows
    kurtosis: np.ndarray  # kurtosis of the selected chip per window
    candidate_kurtosis: np.ndarray  # (Q, rows, cols), nan where degenerate
    centers: tuple  # (row centres, column centres)
    group_index: int = 0

    @property
    def shape(self):
        return self.values.shape

    def chip(self, wy, wx):
        R = self.values.shape[0] // self.angle_index.shape[0]
        return self.values[wy * R : (wy + 1) * R, wx * R : (wx + 1) * R]


def build_lut(Q=6, R=5) -> ChipLut:
    """Integer line offsets (round(r cos t), round(r sin t)), r = -(R-1)/2..(R-1)/2."""
    if Q < 2:
        raise ParameterError(f"need at least 2 angles, got Q={Q}")
    if R < 3 or R % 2 == 0:
        raise ParameterError(f"chip side must be odd and >= 3, got R={R}")
    h = (R - 1) // 2
    r = np.arange(-h, h + 1, dtype=np.float64)
    theta = np.arange(Q) * np.pi / Q
    dx = round_half_away(np.cos(theta)[:, None] * r[None, :])
    dy = round_half_away(np.sin(theta)[:, None] * r[None, :])
    dx.setflags(write=False)
    dy.setflags(write=False)
    return ChipLut(Q, R, dx, dy)


def window_grid(size, R, D):
    """Centres of the kept windows along one axis: every D-th R-tile."""
    tiles = size // R
    return np.arange(0, tiles, D) * R + (R - 1) // 2


def mosaic_shape(M, N, R=5, D=4):
    """Rows/cols of the aggregated chip frame for an M x N input."""
    return (R * len(window_grid(M, R, D)), R * len(window_grid(N, R, D)))


def sample_kurtosis(values, axis=-1):
    """Population kurtosis m4/m2^2 along ``axis``; nan where the variance is degenerate."""
    mean = values.mean(axis=axis, keepdims=True)
    d = values - mean
    d2 = d * d
    m2 = d2.mean(axis=axis)
    m4 = (d2 * d2).mean(axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = m4 / (m2 * m2)
    return np.where(m2 < DEGENERATE_VARIANCE, np.nan, k)


SELECTION_RULES = ("closest", "min_excess")


def extract_chips(group, lut: ChipLut, D=4, group_index=0, selection="closest") -> ChipFrame:
    """Select one chip per window and tile the winners into a mosaic.

    ``group`` is an (R, H, W) stack of bandpassed frames. ``selection`` is
    ``"closest"`` (|kurtosis - 3| minimal) or ``"min_excess"`` (smallest
    kurtosis); the two agree whenever all candidates are leptokurtic.
    """
    if selection not in SELECTION_RULES:
        raise ParameterError(f"unknown selection rule {selection!r}")
    group = np.asarray(group, dtype=np.float64)
    R, Q = lut.R, lut.Q
    if group.ndim != 3 or group.shape[0] != R:
        raise GeometryError(f"expected {R} frames of 2-D data, got shape {group.shape}")
    H, W = group.shape[1:]
    if H < R or W < R:
        raise GeometryError(f"frame {H}x{W} is smaller than a {R}x{R} chip window")
    if D < 1:
        raise ParameterError(f"window stride factor must be >= 1, got D={D}")

    cy = window_grid(H, R, D)
    cx = window_grid(W, R, D)
    ny, nx = len(cy), len(cx)
    # candidates[q, m, r, wy, wx] = group[m, cy + dy[q, r], cx + dx[q, r]]
    rows = cy[None, None, :, None] + lut.dy[:, :, None, None]  # (Q, R, ny, 1)
    cols = cx[None, None, None, :] + lut.dx[:, :, None, None]  # (Q, R, 1, nx)
    flat = group.reshape(R, H * W)
    lin = rows * W + cols  # (Q, R, ny, nx)
    cand = flat[:, lin]  # (R_time, Q, R_line, ny, nx)
    cand = np.moveaxis(cand, 0, 1)  # (Q, m, r, ny, nx)

    kurt = sample_kurtosis(cand.reshape(Q, R * R, ny, nx), axis=1)
    dist = np.abs(kurt - 3.0) if selection == "closest" else kurt - 3.0
    dist = np.where(np.isnan(dist), np.inf, dist)
    # argmin takes the first minimum, so ties and all-degenerate windows go to angle 0
    best = np.argmin(dist, axis=0)

    chosen = np.take_along_axis(cand, best[None, None, None, :, :], axis=0)[0]  # (m, r, ny, nx)
    values = chosen.transpose(2, 0, 3, 1).reshape(ny * R, nx * R)
    kbest = np.take_along_axis(kurt, best[None], axis=0)[0]
    return ChipFrame(values, best, kbest, kurt, (cy, cx), group_index)


def write_angle_map(path, chip_frame: ChipFrame, Q=6):
    """Dump the selected-angle map as a binary PGM, one pixel per window.

    Codes are spread over 0..255 so the Q angles are visually distinct.
    """
    idx = np.asarray(chip_frame.angle_index, dtype=np.int64)
    codes = (idx * (255 // max(Q - 1, 1))).astype(np.uint8)
    h, w = codes.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(codes.tobytes())
