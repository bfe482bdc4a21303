"""NIQE-style naturalness block: patch features, a multivariate Gaussian model
of pristine patches, and the distance score."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .bandpass import DEFAULT_C, mscn
from .errors import ConfigurationError
from .features import SentinelLog, aggd_features, ggd_features, paired_products
from .pixelmath import downscale2, luma709_rgb

log = logging.getLogger(__name__)

N_PATCH_FEATURES = 36
DEFAULT_MODEL = "niqe_default.json"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".pgm", ".ppm")


@dataclass(frozen=True, eq=False)
class NiqeModel:
    mean_vector: np.ndarray
    covariance: np.ndarray
    patch_size: int = 96
    sharpness_fraction: float = 0.75

    def __post_init__(self):
        mean = np.asarray(self.mean_vector, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        n = mean.size
        if cov.shape != (n, n):
            raise ConfigurationError(f"NIQE covariance shape {cov.shape} does not match mean of {n}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ConfigurationError("NIQE covariance is not symmetric")
        object.__setattr__(self, "mean_vector", mean)
        object.__setattr__(self, "covariance", cov)

    def to_json_obj(self):
        return {
            "mean": self.mean_vector.tolist(),
            "cov": self.covariance.tolist(),
            "patch_size": int(self.patch_size),
            "sharpness_fraction": float(self.sharpness_fraction),
        }

    @classmethod
    def from_json_obj(cls, obj):
        try:
            return cls(
                np.asarray(obj["mean"], dtype=np.float64),
                np.asarray(obj["cov"], dtype=np.float64),
                int(obj.get("patch_size", 96)),
                float(obj.get("sharpness_fraction", 0.75)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed NIQE model: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh)

    @classmethod
    def load(cls, path=None):
        """Load a model file; ``None`` selects the bundled default model."""
        if path is None:
            text = resources.files("stvqa").joinpath("data", DEFAULT_MODEL).read_text()
            return cls.from_json_obj(json.loads(text))
        try:
            with open(path) as fh:
                return cls.from_json_obj(json.load(fh))
        except OSError as exc:
            raise ConfigurationError(f"cannot read NIQE model {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"NIQE model {path} is not valid JSON: {exc}") from exc


def effective_patch_size(shape, patch_size):
    """Patch side actually used: shrunk (to an even size) for frames smaller than one patch."""
    p = min(int(patch_size), *shape)
    return p - (p % 2)


def _patch_grid(shape, p):
    h, w = shape
    return [(i, j) for i in range(0, h - p + 1, p) for j in range(0, w - p + 1, p)]


def _subband_features(coeffs, slog, block):
    feats = list(ggd_features(coeffs, slog, block))
    for prod in paired_products(coeffs):
        feats.extend(aggd_features(prod, slog, block))
    return feats


def patch_features(luma, patch_size=96, sharpness_fraction=0.75, K=3, C=DEFAULT_C, slog=None, select=True):
    """(n_patches, 36) features of the sharpest patches of one luma frame.

    Patches tile the frame without overlap; the half-scale features come from
    the co-located half-size patch of the 2x box-downscaled frame.
    """
    luma = np.asarray(luma, dtype=np.float64)
    p = effective_patch_size(luma.shape, patch_size)
    if p < 2:
        raise ConfigurationError(f"frame {luma.shape} too small for NIQE patches")
    full = mscn(luma, K, C)
    half = mscn(downscale2(luma), K, C).mscn
    hp = p // 2
    grid = _patch_grid(luma.shape, p)
    sharp = np.array([full.sigma[i : i + p, j : j + p].mean() for i, j in grid])
    if select and sharp.max() > 0:
        keep = [g for g, s in zip(grid, sharp) if s >= sharpness_fraction * sharp.max()]
    else:
        keep = grid
    rows = []
    for i, j in keep:
        a = _subband_features(full.mscn[i : i + p, j : j + p], slog, "niqe")
        b = _subband_features(half[i // 2 : i // 2 + hp, j // 2 : j // 2 + hp], slog, "niqe")
        rows.append(a + b)
    return np.array(rows)


def niqe_distance(mu1, cov1, mu2, cov2, warnings=None):
    """sqrt((mu1-mu2)^T ((cov1+cov2)/2)^-1 (mu1-mu2)); pseudo-inverse if singular."""
    d = np.atleast_1d(np.asarray(mu1, dtype=np.float64) - np.asarray(mu2, dtype=np.float64))
    pooled = (np.atleast_2d(cov1) + np.atleast_2d(cov2)) / 2.0
    if np.linalg.matrix_rank(pooled) < pooled.shape[0]:
        if warnings is not None:
            warnings.append("niqe: singular pooled covariance, used pseudo-inverse")
        q = d @ np.linalg.pinv(pooled) @ d
    else:
        q = d @ np.linalg.solve(pooled, d)
    return float(np.sqrt(max(q, 0.0)))


def frame_niqe(luma, model: NiqeModel, K=3, C=DEFAULT_C, slog=None, warnings=None):
    """37 values: mean patch features followed by the naturalness score."""
    feats = patch_features(luma, model.patch_size, model.sharpness_fraction, K, C, slog)
    mu = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False) if len(feats) > 1 else np.zeros((feats.shape[1],) * 2)
    score = niqe_distance(model.mean_vector, model.covariance, mu, cov, warnings)
    return np.append(mu, score)


def niqe_block(luma_frames, model: NiqeModel, K=3, C=DEFAULT_C, slog=None, warnings=None):
    """Average of :func:`frame_niqe` over the supplied (already sampled) frames."""
    rows = [frame_niqe(f, model, K, C, slog, warnings) for f in luma_frames]
    if not rows:
        raise ValueError("need at least one frame for the NIQE block")
    return np.mean(rows, axis=0)


def fit_model(lumas, patch_size=96, sharpness_fraction=0.75, K=3, C=DEFAULT_C) -> NiqeModel:
    """Multivariate Gaussian fit to sharp-patch features of pristine luma images."""
    slog = SentinelLog()
    feats = np.vstack([patch_features(y, patch_size, sharpness_fraction, K, C, slog) for y in lumas])
    if slog:
        log.warning("pristine corpus: %s", "; ".join(slog.messages()))
    if len(feats) < 2:
        raise ConfigurationError("pristine corpus yields fewer than 2 patches")
    cov = np.cov(feats, rowvar=False)
    cov = (cov + cov.T) / 2.0
    return NiqeModel(feats.mean(axis=0), cov, patch_size, sharpness_fraction)


def load_luma_image(path):
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.asarray(im, dtype=np.float64)
            peak = 65535.0 if arr.max() > 255 else 255.0
            return arr / peak
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return luma709_rgb(rgb)


def fit_model_from_folder(folder, patch_size=96, sharpness_fraction=0.75, K=3, C=DEFAULT_C):
    folder = Path(folder)
    if not folder.is_dir():
        raise ConfigurationError(f"pristine image folder {folder} does not exist")
    paths = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ConfigurationError(f"no images found in {folder}")
    return fit_model([load_luma_image(p) for p in paths], patch_size, sharpness_fraction, K, C)
