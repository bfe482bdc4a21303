"""Moment statistics and moment-matching GGD / AGGD fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DegenerateDistributionError, OneSidedDistributionError

DEGENERATE_VARIANCE = 1e-12

SHAPE_GRID = np.round(np.arange(0.2, 10.0 + 5e-4, 1e-3), 6)
# Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2; strictly decreasing in a
_GGD_RATIO = gamma_fn(1.0 / SHAPE_GRID) * gamma_fn(3.0 / SHAPE_GRID) / gamma_fn(2.0 / SHAPE_GRID) ** 2
# searchsorted wants ascending order
_RATIO_ASC = _GGD_RATIO[::-1].copy()
_SHAPE_ASC = SHAPE_GRID[::-1].copy()
for _arr in (SHAPE_GRID, _GGD_RATIO, _RATIO_ASC, _SHAPE_ASC):
    _arr.setflags(write=False)


@dataclass(frozen=True)
class GGDParams:
    alpha: float
    sigma2: float


@dataclass(frozen=True)
class AGGDParams:
    nu: float
    sigma_l2: float
    sigma_r2: float
    eta: float

    def as_tuple(self):
        """Feature order used throughout: shape, mean offset, left and right variance."""
        return (self.nu, self.eta, self.sigma_l2, self.sigma_r2)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    degenerate: bool = False


GGD_SENTINEL = GGDParams(2.0, 0.0)
AGGD_SENTINEL = AGGDParams(2.0, 0.0, 0.0, 0.0)


def ggd_ratio(alpha):
    alpha = np.asarray(alpha, dtype=np.float64)
    return gamma_fn(1.0 / alpha) * gamma_fn(3.0 / alpha) / gamma_fn(2.0 / alpha) ** 2


def invert_ratio(rho):
    """Grid shape whose GGD ratio is nearest to ``rho`` (vectorized)."""
    rho = np.asarray(rho, dtype=np.float64)
    pos = np.searchsorted(_RATIO_ASC, rho)
    pos = np.clip(pos, 1, len(_RATIO_ASC) - 1)
    lo, hi = _RATIO_ASC[pos - 1], _RATIO_ASC[pos]
    # ties go to the lower ratio entry, i.e. the larger shape
    pick = np.where(np.abs(rho - lo) <= np.abs(hi - rho), pos - 1, pos)
    return _SHAPE_ASC[pick]


def _flat(samples):
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise DegenerateDistributionError(f"need at least 2 samples, got {x.size}")
    return x


def fit_ggd(samples) -> GGDParams:
    """Zero-mode GGD by matching E[x^2] / E[|x|]^2; sigma2 is the second moment."""
    x = _flat(samples)
    if x.var() < DEGENERATE_VARIANCE:
        raise DegenerateDistributionError("sample variance below degenerate threshold")
    m1 = np.mean(np.abs(x))
    m2 = np.mean(x * x)
    return GGDParams(float(invert_ratio(m2 / (m1 * m1))), float(m2))


def fit_aggd(samples) -> AGGDParams:
    """Asymmetric GGD by the standard side-variance moment matching estimator.

    Exact zeros count toward the global moments but not toward either side.
    """
    x = _flat(samples)
    if x.var() < DEGENERATE_VARIANCE:
        raise DegenerateDistributionError("sample variance below degenerate threshold")
    left = x[x < 0]
    right = x[x > 0]
    if left.size == 0 or right.size == 0:
        raise OneSidedDistributionError("all nonzero samples share one sign")
    sl2 = float(np.mean(left * left))
    sr2 = float(np.mean(right * right))
    g = np.sqrt(sl2 / sr2)
    r_hat = np.mean(np.abs(x)) ** 2 / np.mean(x * x)
    r_norm = r_hat * (g**3 + 1.0) * (g + 1.0) / (g * g + 1.0) ** 2
    nu = float(invert_ratio(1.0 / r_norm))
    spread = np.sqrt(gamma_fn(1.0 / nu) / gamma_fn(3.0 / nu))
    beta_l = np.sqrt(sl2) * spread
    beta_r = np.sqrt(sr2) * spread
    eta = (beta_r - beta_l) * gamma_fn(2.0 / nu) / gamma_fn(1.0 / nu)
    return AGGDParams(nu, sl2, sr2, float(eta))


def moments(samples) -> MomentSummary:
    """Population-normalized moments; kurtosis is the non-excess m4 / m2^2."""
    x = _flat(samples)
    mean = x.mean()
    d = x - mean
    d2 = d * d
    m2 = np.mean(d2)
    if m2 < DEGENERATE_VARIANCE:
        return MomentSummary(float(mean), float(m2), float("nan"), float("nan"), True)
    m3 = np.mean(d2 * d)
    m4 = np.mean(d2 * d2)
    return MomentSummary(float(mean), float(m2), float(m3 / m2**1.5), float(m4 / (m2 * m2)))

