"""Synthetic translating-texture videos and orientation-accuracy measurements
for the kurtosis-based chip selector."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage, stats

from .bandpass import bandpass_group, temporal_kernel
from .config import PipelineConfig
from .errors import ParameterError
from .stchips import build_lut, extract_chips

TEXTURES = ("smoothed-noise", "white-noise")
UNIFORM_MAAD = np.pi / 4  # E|U - theta| folded, U uniform over orientations


@dataclass(frozen=True)
class SyntheticSpec:
    theta: float  # direction of travel, radians in [0, pi)
    speed: float = 1.0  # pixels per frame
    texture: str = "smoothed-noise"
    sigma_s: float = 2.0
    size: tuple = (128, 128)  # (width, height)
    frames: int = 10
    seed: int = 0
    contrast: float = 0.1  # texture std around mid-gray

    def __post_init__(self):
        if self.speed < 0:
            raise ParameterError(f"speed must be >= 0, got {self.speed}")
        if not 0.0 <= self.theta < np.pi:
            raise ParameterError(f"theta must lie in [0, pi), got {self.theta}")
        if self.texture not in TEXTURES:
            raise ParameterError(f"texture must be one of {TEXTURES}")
        if min(self.size) < 64:
            raise ParameterError(f"size must be at least 64x64, got {self.size}")


def make_texture(spec: SyntheticSpec) -> np.ndarray:
    w, h = spec.size
    tex = np.random.default_rng(spec.seed).standard_normal((h, w))
    if spec.texture == "smoothed-noise":
        tex = ndimage.gaussian_filter(tex, spec.sigma_s, mode="wrap")
    tex = (tex - tex.mean()) / tex.std()
    return 0.5 + spec.contrast * tex


def make_video(spec: SyntheticSpec, T=5) -> np.ndarray:
    """(frames, height, width) luma; frame t is the texture moved by t*speed
    along theta with wraparound.  Integer displacements use exact rolls,
    fractional ones a Fourier shift."""
    if spec.frames < 2 * T:
        raise ParameterError(f"need at least {2 * T} frames, got {spec.frames}")
    tex = make_texture(spec)
    spectrum = None
    out = np.empty((spec.frames, *tex.shape))
    for t in range(spec.frames):
        dx = t * spec.speed * np.cos(spec.theta)
        dy = t * spec.speed * np.sin(spec.theta)
        rx, ry = round(dx), round(dy)
        if abs(dx - rx) < 1e-9 and abs(dy - ry) < 1e-9:
            out[t] = np.roll(tex, (ry, rx), axis=(0, 1))
        else:
            if spectrum is None:
                spectrum = np.fft.fft2(tex)
            out[t] = np.fft.ifft2(ndimage.fourier_shift(spectrum, (dy, dx))).real
    return out


@dataclass
class AngleReport:
    theta: float  # ground truth folded into [0, pi)
    applicable: bool
    maad: float | None
    histogram: list  # selected-angle counts per angle index
    offsets: list  # bin centres, multiples of pi/Q in [0, pi)
    kurtosis_by_offset: list  # mean candidate-chip kurtosis per offset bin
    excess_by_offset: list  # mean |kurtosis - 3| per offset bin
    offset_counts: list
    n_windows: int
    flags: list

    def to_json_obj(self):
        return asdict(self)

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, indent=1)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["angular_offset", "mean_kurtosis"])
            for off, k in zip(self.offsets, self.kurtosis_by_offset):
                w.writerow([repr(off), repr(k)])


def angular_deviation(estimate, truth):
    """Orientation difference folded into [0, pi/2]."""
    d = np.mod(np.asarray(estimate, dtype=np.float64) - truth, np.pi)
    return np.minimum(d, np.pi - d)


def _nanmean_or_none(values):
    return float(np.mean(values)) if len(values) else None


def evaluate_orientation(video, theta, config: PipelineConfig | None = None) -> AngleReport:
    """Run bandpass + chip selection over every T'-group of ``video`` and
    compare the selected angles with the orientation ``theta``.

    The kurtosis curve bins every finite candidate chip (not only the
    selected ones) by its angle offset ``(theta_q - theta) mod pi``.
    """
    cfg = config or PipelineConfig()
    video = np.asarray(video, dtype=np.float64)
    theta = float(np.mod(theta, np.pi))
    lut = build_lut(cfg.Q, cfg.R)
    kernel = temporal_kernel(cfg.a, cfg.T)
    step = np.pi / cfg.Q
    n_groups = video.shape[0] // cfg.T
    if n_groups < 1:
        raise ParameterError(f"need at least {cfg.T} frames, got {video.shape[0]}")

    selected, cand = [], []
    for g in range(n_groups):
        frames = video[g * cfg.T : (g + 1) * cfg.T]
        bp = bandpass_group(frames, cfg.K, cfg.C_stabilizer, kernel)
        cf = extract_chips(bp, lut, cfg.D, g, cfg.selection)
        selected.append(cf.angle_index.ravel())
        cand.append(cf.candidate_kurtosis.reshape(cfg.Q, -1))
    selected = np.concatenate(selected)
    cand = np.concatenate(cand, axis=1)

    offsets = np.mod(lut.angles - theta, np.pi)
    bins = np.mod(np.rint(offsets / step).astype(int), cfg.Q)
    kurt, excess, counts = [], [], []
    for b in range(cfg.Q):
        vals = cand[bins == b].ravel()
        vals = vals[np.isfinite(vals)]
        kurt.append(_nanmean_or_none(vals))
        excess.append(_nanmean_or_none(np.abs(vals - 3.0)))
        counts.append(int(vals.size))

    flags = []
    static = all(np.array_equal(video[0], f) for f in video[1:])
    if static:
        flags.append("static video: orientation is undefined, MAAD not applicable")
        maad = None
    else:
        maad = float(np.mean(angular_deviation(selected * step, theta)))
    return AngleReport(
        theta,
        not static,
        maad,
        np.bincount(selected, minlength=cfg.Q).tolist(),
        [b * step for b in range(cfg.Q)],
        kurt,
        excess,
        counts,
        int(selected.size),
        flags,
    )


def validate(spec: SyntheticSpec, config: PipelineConfig | None = None) -> AngleReport:
    cfg = config or PipelineConfig()
    return evaluate_orientation(make_video(spec, cfg.T), spec.theta, cfg)


def beats_uniform(maads, alpha=0.05):
    """One-sided t-test that mean MAAD is below the uniform-guess value pi/4.

    Returns (passed, p_value).
    """
    res = stats.ttest_1samp(np.asarray(maads, dtype=np.float64), UNIFORM_MAAD, alternative="less")
    return bool(res.pvalue < alpha), float(res.pvalue)
