import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from stvqa.video_io import encode_frames, write_y4m


def ggd_sample(rng, alpha, sigma2, n):
    """Zero-mode GGD draws: |x| = s * G**(1/alpha), G ~ Gamma(1/alpha), random sign."""
    s = np.sqrt(sigma2 * gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha))
    mag = s * rng.gamma(1.0 / alpha, 1.0, n) ** (1.0 / alpha)
    return np.where(rng.random(n) < 0.5, -mag, mag)


def noise_planes(rng, n, h, w, std=0.1):
    return [np.clip(0.5 + std * rng.standard_normal((n, h, w)), 0, 1) for _ in range(3)]


def write_noise_y4m(path, rng, n=10, h=64, w=64, std=0.1, sub="420", bit_depth=8):
    y, cb, cr = noise_planes(rng, n, h, w, std)
    write_y4m(path, encode_frames(y, cb, cr, sub, bit_depth), w, h, chroma_subsampling=sub, bit_depth=bit_depth)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noise_y4m(tmp_path, rng):
    return write_noise_y4m(tmp_path / "noise.y4m", rng)


def cvxopt_svr_dual(Kmat, z, C, epsilon):
    """Interior-point reference for the 2n-variable epsilon-SVR dual; returns (beta, objective)."""
    from cvxopt import matrix, solvers

    n = z.size
    Q = np.block([[Kmat, -Kmat], [-Kmat, Kmat]])
    p = np.concatenate([epsilon - z, epsilon + z])
    G = np.vstack([-np.eye(2 * n), np.eye(2 * n)])
    h = np.concatenate([np.zeros(2 * n), np.full(2 * n, C)])
    A = np.concatenate([np.ones(n), -np.ones(n)])[None, :]
    solvers.options.update(show_progress=False, abstol=1e-12, reltol=1e-12, feastol=1e-12)
    sol = solvers.qp(matrix(Q + 1e-12 * np.eye(2 * n)), matrix(p), matrix(G), matrix(h), matrix(A), matrix(0.0))
    beta = np.array(sol["x"]).ravel()
    return beta, 0.5 * beta @ Q @ beta + p @ beta


def svr_toy_problems():
    """Five small RBF epsilon-SVR duals as (K, z, C, epsilon)."""
    out = []
    for k in range(5):
        r = np.random.default_rng(100 + k)
        n = 20 + 5 * k
        X = r.standard_normal((n, 3))
        z = np.sin(X[:, 0]) + 0.3 * X[:, 1] + 0.1 * r.standard_normal(n)
        z = (z - z.mean()) / z.std()
        d = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
        out.append((np.exp(-0.5 * d), z, [0.5, 1.0, 4.0, 16.0, 64.0][k], 0.1))
    return out


def brute_ranks(v):
    """Average 1-based ranks with ties, by direct counting."""
    v = list(v)
    return [sum(1 for u in v if u < x) + (sum(1 for u in v if u == x) + 1) / 2 for x in v]


def brute_pearson(a, b):
    import math

    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    sab = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    saa = math.fsum((x - ma) ** 2 for x in a)
    sbb = math.fsum((y - mb) ** 2 for y in b)
    return sab / math.sqrt(saa * sbb)


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
