"""Quality regression: standardization, epsilon-SVR trained by SMO, grid-search
cross-validation, logistic remapping, correlation metrics and split protocols."""

from __future__ import annotations

import csv
import json
import logging
import warnings as _warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.special import expit
from scipy.stats import rankdata

from .errors import ConfigurationError, DataError, PlanError, SchemaError, UndefinedCorrelationError
from .schema import SCHEMA_VERSION

log = logging.getLogger(__name__)

GAMMA_GRID = tuple(10.0**e for e in range(-8, 2))
C_GRID = tuple(float(2**k) for k in range(1, 11))
DEFAULT_EPSILON = 0.1
TAU = 1e-12


class ConvergenceWarning(UserWarning):
    pass


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        return cls(X.mean(axis=0), X.std(axis=0))

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.size:
            raise SchemaError(f"expected {self.mean.size} features, got {X.shape[-1]}")
        out = np.zeros(np.broadcast_shapes(X.shape, self.mean.shape))
        # zero-variance features map to 0
        np.divide(X - self.mean, self.std, out=out, where=self.std > 0)
        return out


def rbf_kernel(A, B, gamma):
    return np.exp(-gamma * cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean"))


def _check_finite(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError(f"features {X.shape} and labels {y.shape} do not line up")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("features and labels must be finite")
    return X, y


# ---------------------------------------------------------------- SMO


@dataclass
class DualSolution:
    beta: np.ndarray  # 2n variables: alpha then alpha*
    coef: np.ndarray  # alpha - alpha*
    bias: float
    objective: float
    max_violation: float
    iterations: int
    converged: bool


def dual_objective(beta, Kmat, z, epsilon):
    """0.5 b'Qb + p'b of the 2n-variable epsilon-SVR dual."""
    n = z.size
    coef = beta[:n] - beta[n:]
    return 0.5 * coef @ Kmat @ coef + epsilon * beta.sum() - z @ coef


def solve_svr_dual(Kmat, z, C, epsilon, tol=1e-3, max_iter=None) -> DualSolution:
    """Sequential minimal optimization with second-order working-set selection.

    Follows the libsvm formulation: variables beta_t with signs y_t = +1 for
    alpha and -1 for alpha*, constraint y'beta = 0, box [0, C].  Stops when
    the maximal KKT violation m(beta) - M(beta) drops below ``tol``.
    """
    Kmat = np.asarray(Kmat, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    ell = 2 * n
    y = np.concatenate([np.ones(n), -np.ones(n)])
    Kfull = np.tile(Kmat, (2, 2))
    Q = y[:, None] * y[None, :] * Kfull
    QD = np.diag(Q).copy()
    p = np.concatenate([epsilon - z, epsilon + z])
    beta = np.zeros(ell)
    G = p.copy()
    if max_iter is None:
        max_iter = max(100_000, 100 * ell)

    it = 0
    converged = False
    gap = np.inf
    while it < max_iter:
        up = ((y > 0) & (beta < C)) | ((y < 0) & (beta > 0))
        low = ((y > 0) & (beta > 0)) | ((y < 0) & (beta < C))
        minus_yg = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            converged = True
            break
        cand = np.where(up, minus_yg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmax2 = np.max(np.where(low, -minus_yg, -np.inf))
        gap = gmax + gmax2
        if gap < tol:
            converged = True
            break
        grad_diff = gmax - minus_yg  # gmax + y_t G_t
        quad = QD[i] + QD - 2.0 * Kfull[i]
        quad = np.where(quad > 0, quad, TAU)
        ok = low & (grad_diff > 0)
        if not ok.any():
            converged = True
            break
        score = np.where(ok, -(grad_diff * grad_diff) / quad, np.inf)
        j = int(np.argmin(score))

        old_i, old_j = beta[i], beta[j]
        Qi, Qj = Q[i], Q[j]
        if y[i] != y[j]:
            qc = QD[i] + QD[j] + 2.0 * Qi[j]
            qc = qc if qc > 0 else TAU
            delta = (-G[i] - G[j]) / qc
            diff = old_i - old_j
            bi, bj = old_i + delta, old_j + delta
            if diff > 0:
                if bj < 0:
                    bj, bi = 0.0, diff
            elif bi < 0:
                bi, bj = 0.0, -diff
            if diff > 0:
                if bi > C:
                    bi, bj = C, C - diff
            elif bj > C:
                bj, bi = C, C + diff
        else:
            qc = QD[i] + QD[j] - 2.0 * Qi[j]
            qc = qc if qc > 0 else TAU
            delta = (G[i] - G[j]) / qc
            total = old_i + old_j
            bi, bj = old_i - delta, old_j + delta
            if total > C:
                if bi > C:
                    bi, bj = C, total - C
            elif bj < 0:
                bj, bi = 0.0, total
            if total > C:
                if bj > C:
                    bj, bi = C, total - C
            elif bi < 0:
                bi, bj = 0.0, total
        beta[i], beta[j] = bi, bj
        G += Qi * (bi - old_i) + Qj * (bj - old_j)
        it += 1

    if not converged:
        _warnings.warn(f"SMO hit the iteration cap ({max_iter}); KKT gap {gap:.3g}", ConvergenceWarning)

    # bias from free variables, else the midpoint of the feasible interval
    yG = y * G
    free = (beta > 0) & (beta < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        to_ub = ((y > 0) & (beta <= 0)) | ((y < 0) & (beta >= C))
        to_lb = ((y > 0) & (beta >= C)) | ((y < 0) & (beta <= 0))
        ub = yG[to_ub].min() if to_ub.any() else np.inf
        lb = yG[to_lb].max() if to_lb.any() else -np.inf
        rho = float((ub + lb) / 2.0) if np.isfinite(ub + lb) else 0.0
    coef = beta[:n] - beta[n:]
    return DualSolution(
        beta, coef, -rho, float(dual_objective(beta, Kmat, z, epsilon)), float(max(gap, 0.0)), it, converged
    )


# ---------------------------------------------------------------- model


@dataclass(eq=False)
class SVRModel:
    support_vectors: np.ndarray
    dual_coeffs: np.ndarray
    bias: float
    gamma: float
    C: float
    epsilon: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    label_mean: float = 0.0
    label_scale: float = 1.0
    schema_version: str = SCHEMA_VERSION
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64)
        self.feature_std = np.asarray(self.feature_std, dtype=np.float64)
        self.dual_coeffs = np.asarray(self.dual_coeffs, dtype=np.float64).ravel()
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        self.support_vectors = sv.reshape(len(self.dual_coeffs), self.feature_mean.size)

    @property
    def standardizer(self):
        return Standardizer(self.feature_mean, self.feature_std)

    def decision(self, X):
        """Kernel expansion plus bias, in z-scored label units."""
        Z = self.standardizer.transform(np.atleast_2d(X))
        if self.dual_coeffs.size == 0:
            return np.full(Z.shape[0], self.bias)
        return rbf_kernel(Z, self.support_vectors, self.gamma) @ self.dual_coeffs + self.bias

    def predict(self, X):
        return self.decision(X) * self.label_scale + self.label_mean

    def to_json_obj(self):
        return {
            "schema_version": self.schema_version,
            "gamma": self.gamma,
            "C": self.C,
            "epsilon": self.epsilon,
            "bias": self.bias,
            "label_mean": self.label_mean,
            "label_scale": self.label_scale,
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coeffs": self.dual_coeffs.tolist(),
            "info": self.info,
        }

    @classmethod
    def from_json_obj(cls, obj):
        try:
            return cls(
                obj["support_vectors"],
                obj["dual_coeffs"],
                float(obj["bias"]),
                float(obj["gamma"]),
                float(obj["C"]),
                float(obj["epsilon"]),
                obj["feature_mean"],
                obj["feature_std"],
                float(obj.get("label_mean", 0.0)),
                float(obj.get("label_scale", 1.0)),
                obj.get("schema_version", ""),
                dict(obj.get("info", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed SVR model: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_json_obj(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read SVR model {path}: {exc}") from exc


def train_svr(features, labels, gamma, C, epsilon=DEFAULT_EPSILON, tol=1e-3, max_iter=None) -> SVRModel:
    X, y = _check_finite(features, labels)
    if X.shape[0] < 2:
        raise DataError("need at least 2 training samples")
    scaler = Standardizer.fit(X)
    Z = scaler.transform(X)
    label_mean = float(y.mean())
    label_scale = float(y.std()) or 1.0
    z = (y - label_mean) / label_scale
    sol = solve_svr_dual(rbf_kernel(Z, Z, gamma), z, C, epsilon, tol, max_iter)
    sv = np.flatnonzero(sol.coef != 0)
    info = {"iterations": sol.iterations, "converged": sol.converged, "max_violation": sol.max_violation}
    return SVRModel(Z[sv], sol.coef[sv], sol.bias, gamma, C, epsilon, scaler.mean, scaler.std,
                    label_mean, label_scale, SCHEMA_VERSION, info)


def kkt_violations(model: SVRModel, features, labels):
    """Residuals outside the tube whose dual coefficient is not at the bound C.

    Returns the list of offending training indices (empty when the solution
    satisfies complementary slackness up to the SMO tolerance).
    """
    X, y = _check_finite(features, labels)
    Z = model.standardizer.transform(X)
    z = (y - model.label_mean) / model.label_scale
    r = z - model.decision(X)
    coef = np.zeros(len(z))
    for k, sv in enumerate(model.support_vectors):
        hits = np.flatnonzero(np.all(Z == sv, axis=1))
        coef[hits] = model.dual_coeffs[k]
    slack = model.info.get("max_violation", 1e-3) + 1e-9
    outside = np.abs(r) > model.epsilon + slack
    return [int(i) for i in np.flatnonzero(outside & (np.abs(np.abs(coef) - model.C) > 1e-9 * model.C))]


# ---------------------------------------------------------------- metrics


def _pearson(a, b):
    a = np.asarray(a, dtype=np.float64) - np.mean(a)
    b = np.asarray(b, dtype=np.float64) - np.mean(b)
    den = np.sqrt((a @ a) * (b @ b))
    if not den > 0:
        raise UndefinedCorrelationError("correlation undefined for zero-variance input")
    return float(np.clip((a @ b) / den, -1.0, 1.0))


def _pair(predicted, mos):
    p = np.asarray(predicted, dtype=np.float64).ravel()
    m = np.asarray(mos, dtype=np.float64).ravel()
    if p.size != m.size or p.size < 2:
        raise DataError(f"need equal-length inputs of at least 2, got {p.size} and {m.size}")
    return p, m


def srocc(predicted, mos):
    """Spearman correlation: Pearson on average-tie ranks."""
    p, m = _pair(predicted, mos)
    return _pearson(rankdata(p), rankdata(m))


def lcc(predicted, mos):
    p, m = _pair(predicted, mos)
    return _pearson(p, m)


def rmse(predicted, mos):
    p, m = _pair(predicted, mos)
    return float(np.sqrt(np.mean((p - m) ** 2)))


def logistic5(s, b):
    return b[0] * (0.5 - expit(-b[1] * (s - b[2]))) + b[3] * s + b[4]


@dataclass
class LogisticFit:
    beta: np.ndarray
    remapped: np.ndarray
    sse: float
    converged: bool


def logistic_fit(predicted, mos, restarts=5, max_iter=2000) -> LogisticFit:
    """Least-squares 5-parameter logistic remap by restarted Nelder-Mead."""
    p, m = _pair(predicted, mos)
    if p.size < 5:
        raise DataError(f"logistic fit needs at least 5 points, got {p.size}")
    sp = p.std()
    if not sp > 0:
        raise UndefinedCorrelationError("predicted scores have zero variance")

    def sse(b):
        r = logistic5(p, b) - m
        return float(r @ r)

    slope, icept = np.polyfit(p, m, 1)
    ftol = 1e-14 * max(float(m @ m), 1.0)
    starts = [
        np.array([m.max() - m.min(), 1.0 / sp, p.mean(), 0.0, m.mean()]),
        np.array([0.0, 1.0 / sp, p.mean(), slope, icept]),
    ]
    best, best_val, converged = None, np.inf, False
    for x0 in starts:
        x = x0
        ok = False
        for _ in range(restarts):
            res = minimize(sse, x, method="Nelder-Mead",
                           options={"maxiter": max_iter, "maxfev": 4 * max_iter, "xatol": 1e-9, "fatol": ftol})
            x, ok = res.x, bool(res.success)
        val = sse(x)
        if val < best_val:
            best, best_val, converged = x, val, ok
    if not converged:
        log.warning("logistic fit did not converge; returning best simplex point")
    return LogisticFit(best, logistic5(p, best), best_val, converged)


@dataclass
class Metrics:
    srocc: float
    lcc: float
    rmse: float
    beta: np.ndarray
    converged: bool = True
    linear_remap: bool = False


def metrics(predicted, mos) -> Metrics:
    """SROCC on raw scores; LCC and RMSE after the logistic remap.

    With fewer than 5 points the remap degrades to a least-squares line.
    """
    p, m = _pair(predicted, mos)
    rho = srocc(p, m)
    if p.size >= 5:
        fit = logistic_fit(p, m)
        remapped, beta, conv, linear = fit.remapped, fit.beta, fit.converged, False
    else:
        slope, icept = np.polyfit(p, m, 1)
        beta = np.array([0.0, 0.0, 0.0, slope, icept])
        remapped, conv, linear = slope * p + icept, True, True
    r = _pearson(remapped, m)
    return Metrics(rho, r, rmse(remapped, m), beta, conv, linear)


# ---------------------------------------------------------------- splits


@dataclass
class SplitPlan:
    train_idx: np.ndarray
    val_folds: list
    test_idx: np.ndarray
    content_map: np.ndarray | None
    seed: int
    content_folds: bool = True


def make_split(n_or_contents, seed=0, content_separated=True, test_fraction=0.2, n_folds=5) -> SplitPlan:
    """Random 80/20 split with validation folds on the training part.

    ``n_or_contents`` is a corpus size or a per-video content-id sequence;
    ``test_fraction=0`` gives a cross-validation-only plan.
    With content separation, whole contents go to test and to each fold;
    when fewer than ``n_folds`` training contents exist each content is
    its own fold, and with a single training content folds are random.
    """
    if np.isscalar(n_or_contents):
        n = int(n_or_contents)
        contents = None
    else:
        contents = np.asarray(n_or_contents)
        n = contents.size
    if content_separated and contents is None:
        raise ConfigurationError("content separation requested but no content map given")
    rng = np.random.default_rng(seed)
    idx = np.arange(n)
    if content_separated:
        uniq = np.unique(contents)
        if uniq.size < 2 and test_fraction > 0:
            raise PlanError("content separation needs at least 2 distinct contents")
        n_test = min(max(1, round(test_fraction * uniq.size)), uniq.size - 1) if test_fraction > 0 else 0
        order = rng.permutation(uniq)
        test_mask = np.isin(contents, order[:n_test])
    else:
        n_test = min(max(1, round(test_fraction * n)), n - 2) if test_fraction > 0 else 0
        test_mask = np.zeros(n, dtype=bool)
        test_mask[rng.permutation(n)[:n_test]] = True
    train_idx, test_idx = idx[~test_mask], idx[test_mask]

    grouped = content_separated and np.unique(contents[train_idx]).size >= 2
    if grouped:
        tc = rng.permutation(np.unique(contents[train_idx]))
        k = min(n_folds, tc.size)
        folds = [train_idx[np.isin(contents[train_idx], part)] for part in np.array_split(tc, k)]
    else:
        folds = [np.sort(f) for f in np.array_split(rng.permutation(train_idx), n_folds)]
    for f in folds:
        if f.size < 2 or train_idx.size - f.size < 2:
            raise PlanError(f"validation fold of {f.size} with {train_idx.size} training videos is too small")
    return SplitPlan(train_idx, folds, test_idx, contents, seed, grouped)


# ---------------------------------------------------------------- grid search


def select_best(scores, gammas=GAMMA_GRID, Cs=C_GRID):
    """Argmax of a (len(gammas), len(Cs)) score grid; ties go to smaller C, then smaller gamma."""
    scores = np.asarray(scores, dtype=np.float64)
    best, pick = -np.inf, (0, 0)
    for ci in np.argsort(Cs, kind="stable"):
        for gi in np.argsort(gammas, kind="stable"):
            s = scores[gi, ci]
            if s > best:
                best, pick = s, (gi, ci)
    return gammas[pick[0]], Cs[pick[1]]


def grid_scores(features, labels, plan: SplitPlan, gammas=GAMMA_GRID, Cs=C_GRID, epsilon=DEFAULT_EPSILON):
    """Mean validation SROCC per grid cell; undefined correlations count as 0."""
    X, y = _check_finite(features, labels)
    scores = np.zeros((len(gammas), len(Cs)))
    for fold in plan.val_folds:
        if len(fold) < 2:
            raise PlanError("validation fold with fewer than 2 samples")
    fits = []
    for fold in plan.val_folds:
        fit_idx = np.setdiff1d(plan.train_idx, fold)
        scaler = Standardizer.fit(X[fit_idx])
        Zf, Zv = scaler.transform(X[fit_idx]), scaler.transform(X[fold])
        mu = y[fit_idx].mean()
        sc = y[fit_idx].std() or 1.0
        fits.append((Zf, Zv, (y[fit_idx] - mu) / sc, y[fold]))
    for gi, g in enumerate(gammas):
        for Zf, Zv, zf, yv in fits:
            Kf = rbf_kernel(Zf, Zf, g)
            Kv = rbf_kernel(Zv, Zf, g)
            for ci, c in enumerate(Cs):
                sol = solve_svr_dual(Kf, zf, c, epsilon)
                try:
                    scores[gi, ci] += srocc(Kv @ sol.coef + sol.bias, yv)
                except UndefinedCorrelationError:
                    pass
    return scores / len(plan.val_folds)


def grid_search(features, labels, plan: SplitPlan, gammas=GAMMA_GRID, Cs=C_GRID, epsilon=DEFAULT_EPSILON):
    return select_best(grid_scores(features, labels, plan, gammas, Cs, epsilon), gammas, Cs)


# ---------------------------------------------------------------- protocol


@dataclass
class SplitResult:
    index: int
    seed: int
    gamma: float
    C: float
    srocc: float
    lcc: float
    rmse: float
    beta: list
    n_train: int
    n_test: int
    warnings: list = field(default_factory=list)


@dataclass
class EvalReport:
    splits: list
    content_separated: bool
    master_seed: int

    def _col(self, name):
        return np.array([getattr(s, name) for s in self.splits])

    def summary(self):
        out = {}
        for name in ("srocc", "lcc", "rmse"):
            v = self._col(name)
            out[name] = {"median": float(np.median(v)), "std": float(np.std(v))}
        return out

    @property
    def median_srocc(self):
        return self.summary()["srocc"]["median"]

    def to_json_obj(self):
        return {
            "master_seed": self.master_seed,
            "content_separated": self.content_separated,
            "summary": self.summary(),
            "splits": [asdict(s) for s in self.splits],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, indent=1)

    def write_csv(self, path):
        cols = ["index", "seed", "gamma", "C", "srocc", "lcc", "rmse", "n_train", "n_test",
                "beta1", "beta2", "beta3", "beta4", "beta5"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for s in self.splits:
                w.writerow([s.index, s.seed, repr(s.gamma), repr(s.C), repr(s.srocc), repr(s.lcc),
                            repr(s.rmse), s.n_train, s.n_test, *(repr(float(b)) for b in s.beta)])


def run_split(X, y, contents, index, seed, content_separated=True, gammas=GAMMA_GRID, Cs=C_GRID,
              epsilon=DEFAULT_EPSILON) -> SplitResult:
    split_seed = seed + index
    plan = make_split(contents if contents is not None else len(y), split_seed, content_separated)
    gamma, C = grid_search(X, y, plan, gammas, Cs, epsilon)
    model = train_svr(X[plan.train_idx], y[plan.train_idx], gamma, C, epsilon)
    pred = model.predict(X[plan.test_idx])
    notes = []
    try:
        m = metrics(pred, y[plan.test_idx])
        vals = (m.srocc, m.lcc, m.rmse, m.beta.tolist())
        if not m.converged:
            notes.append("logistic fit did not converge")
        if m.linear_remap:
            notes.append("fewer than 5 test videos: linear remap")
    except UndefinedCorrelationError as exc:
        notes.append(f"undefined correlation: {exc}")
        vals = (0.0, 0.0, rmse(pred, y[plan.test_idx]), [0.0] * 5)
    return SplitResult(index, split_seed, gamma, C, *vals[:3], vals[3],
                       int(plan.train_idx.size), int(plan.test_idx.size), notes)


def run_protocol(features, mos, contents=None, n_splits=10, content_separated=True, seed=0,
                 gammas=GAMMA_GRID, Cs=C_GRID, epsilon=DEFAULT_EPSILON) -> EvalReport:
    X, y = _check_finite(features, mos)
    if y.size < 10:
        raise DataError(f"protocol needs at least 10 videos, got {y.size}")
    if content_separated and contents is None:
        raise ConfigurationError("content separation requested but no content map given")
    contents = None if contents is None else np.asarray(contents)
    results = [run_split(X, y, contents, k, seed, content_separated, gammas, Cs, epsilon)
               for k in range(n_splits)]
    return EvalReport(results, content_separated, seed)


def read_mos_csv(path):
    """{video_id: (mos, content_id or None)} from a ``video_id,mos[,content_id]`` CSV."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"video_id", "mos"} <= set(reader.fieldnames):
            raise SchemaError(f"{path}: MOS CSV needs video_id and mos columns")
        for line, row in enumerate(reader, start=2):
            cid = row.get("content_id")
            try:
                score = float(row["mos"])
            except (TypeError, ValueError):
                raise SchemaError(f"{path}:{line}: MOS {row['mos']!r} is not a number") from None
            out[row["video_id"]] = (score, cid if cid not in (None, "") else None)
    return out
