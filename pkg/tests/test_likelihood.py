"""Error model: sigma network, covariance construction, exact NLL against a
dense elimination oracle, analytic gradients, and interval calibration."""

import numpy as np
import pytest

from fdst.fno import FnoConfig, init_params
from fdst.likelihood import (
    CovParams,
    ForecastDist,
    build_covariance,
    forecast_distribution,
    gaussian_nll,
    init_cov_params,
    nll_gradients,
    prediction_interval,
    stddev_field,
)
from fdst.fno import HistoryWindow, fno_forward


def _random_cov_params(n, hidden, alpha_r, seed, scale=0.3):
    rng = np.random.default_rng(seed)
    return CovParams(
        W1=scale * rng.standard_normal((hidden, n)),
        b1=0.1 * rng.standard_normal(hidden),
        W2=scale * rng.standard_normal((n, hidden)),
        b2=0.1 * rng.standard_normal(n),
        alpha_r=alpha_r,
    )


def test_stddev_zero_weights_gives_softplus_zero():
    n, hidden = 8, 4
    alpha = CovParams(
        W1=np.zeros((hidden, n)),
        b1=np.zeros(hidden),
        W2=np.zeros((n, hidden)),
        b2=np.zeros(n),
        alpha_r=0.1,
    )
    s = stddev_field(np.random.default_rng(0).standard_normal(n), alpha)
    assert np.allclose(s, np.log(2.0) + 1e-4)


def test_stddev_positive_on_random_inputs():
    alpha = _random_cov_params(16, 8, 0.1, seed=1, scale=1.0)
    rng = np.random.default_rng(2)
    for _ in range(1000):
        s = stddev_field(5 * rng.standard_normal(16), alpha)
        assert np.all(s >= 1e-4)


def test_stddev_matches_two_layer_oracle():
    n, hidden = 10, 5
    alpha = _random_cov_params(n, hidden, 0.1, seed=3)
    y = np.random.default_rng(4).standard_normal(n)
    got = stddev_field(y, alpha)
    # independent route: explicit loops and a literal softplus
    for i in range(n):
        acc = alpha.b2[i]
        for j in range(hidden):
            pre = alpha.b1[j]
            for k in range(n):
                pre += alpha.W1[j, k] * y[k]
            acc += alpha.W2[i, j] * np.tanh(pre)
        want = np.log1p(np.exp(acc)) + 1e-4
        assert abs(got[i] - want) < 1e-10


def test_covariance_diagonal_and_limits():
    sigma = np.array([0.5, 1.0, 2.0, 0.25])
    cov = build_covariance(sigma, alpha_r=0.1)
    jit = 1e-6 * np.mean(sigma**2)
    assert np.allclose(np.diag(cov), sigma**2 + jit)
    tiny = build_covariance(sigma, alpha_r=1e-9)
    off = tiny - np.diag(np.diag(tiny))
    assert np.max(np.abs(off)) < 1e-12 * np.max(sigma) ** 2


def test_covariance_symmetric_and_factorizable():
    rng = np.random.default_rng(5)
    for _ in range(100):
        sigma = np.exp(rng.uniform(-2, 1, size=64))
        alpha_r = float(rng.uniform(0.005, 0.08))
        cov = build_covariance(sigma, alpha_r)
        assert np.array_equal(cov, cov.T)
        np.linalg.cholesky(cov)  # raises if not PD


def _dense_oracle_nll(y, mu, Sigma):
    """Gaussian elimination with partial pivoting: determinant from pivots,
    solve by back substitution.  No factorization library calls."""
    n = y.size
    A = Sigma.copy()
    b = (y - mu).copy()
    det = 1.0
    for col in range(n):
        p = col + int(np.argmax(np.abs(A[col:, col])))
        if p != col:
            A[[col, p]] = A[[p, col]]
            b[[col, p]] = b[[p, col]]
            det = -det
        det *= A[col, col]
        for row in range(col + 1, n):
            f = A[row, col] / A[col, col]
            A[row, col:] -= f * A[col, col:]
            b[row] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1 :] @ x[row + 1 :]) / A[row, row]
    quad = float((y - mu) @ x)
    return 0.5 * (quad + np.log(det) + n * np.log(2 * np.pi))


def test_nll_trivial_values():
    assert abs(gaussian_nll(np.zeros(2), np.zeros(2), np.eye(2)) - np.log(2 * np.pi)) < 1e-12
    v = gaussian_nll(np.array([1.0]), np.array([0.0]), np.array([[1.0]]))
    assert abs(v - 0.5 * (np.log(2 * np.pi) + 1.0)) < 1e-12


def test_nll_matches_dense_oracle():
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = 8
        sigma = np.exp(rng.uniform(-1, 0.5, size=n))
        cov = build_covariance(sigma, float(rng.uniform(0.01, 0.08)))
        y = rng.standard_normal(n)
        mu = rng.standard_normal(n)
        got = gaussian_nll(y, mu, cov)
        want = _dense_oracle_nll(y, mu, cov)
        assert abs(got - want) / max(1.0, abs(want)) < 1e-9


def test_nll_permutation_invariant():
    rng = np.random.default_rng(7)
    n = 12
    sigma = np.exp(rng.uniform(-1, 0, size=n))
    cov = build_covariance(sigma, 0.05)
    y = rng.standard_normal(n)
    mu = rng.standard_normal(n)
    perm = rng.permutation(n)
    a = gaussian_nll(y, mu, cov)
    b = gaussian_nll(y[perm], mu[perm], cov[np.ix_(perm, perm)])
    assert abs(a - b) < 1e-9


def test_nll_not_pd_error():
    bad = -np.eye(4)
    with pytest.raises(np.linalg.LinAlgError, match="not PD"):
        gaussian_nll(np.zeros(4), np.zeros(4), bad, sigma=np.ones(4))


def test_gradient_zero_residual():
    n = 8
    alpha = _random_cov_params(n, 4, 0.05, seed=8)
    y = np.random.default_rng(9).standard_normal(n)
    _, gmu, _ = nll_gradients(y, y.copy(), y, alpha)
    assert np.max(np.abs(gmu)) < 1e-12


def test_gradients_match_finite_differences():
    n, hidden = 16, 6
    alpha = _random_cov_params(n, hidden, 0.06, seed=10)
    rng = np.random.default_rng(11)
    y_k = rng.standard_normal(n)
    y = 0.5 * rng.standard_normal(n)
    mu = 0.5 * rng.standard_normal(n)
    nll, gmu, gc = nll_gradients(y, mu, y_k, alpha)

    def val():
        s = stddev_field(y_k, alpha)
        return gaussian_nll(y, mu, build_covariance(s, alpha.alpha_r), sigma=s)

    assert abs(nll - val()) < 1e-9 * max(1.0, abs(nll))
    eps = 1e-5

    def fd(arr, idx):
        old = arr[idx]
        arr[idx] = old + eps
        lp = val()
        arr[idx] = old - eps
        lm = val()
        arr[idx] = old
        return (lp - lm) / (2 * eps)

    picks = np.random.default_rng(12)
    for arr, grad, tol in [
        (alpha.W1, gc.W1, 1e-4),
        (alpha.b1, gc.b1, 1e-4),
        (alpha.W2, gc.W2, 1e-4),
        (alpha.b2, gc.b2, 1e-4),
        (mu, gmu, 1e-6),
    ]:
        for _ in range(6):
            idx = tuple(picks.integers(0, s) for s in arr.shape)
            f = fd(arr, idx)
            assert abs(grad[idx] - f) / max(1.0, abs(f)) < tol
    old = alpha.alpha_r
    alpha.alpha_r = old + eps
    lp = val()
    alpha.alpha_r = old - eps
    lm = val()
    alpha.alpha_r = old
    f = (lp - lm) / (2 * eps)
    assert abs(gc.alpha_r - f) / max(1.0, abs(f)) < 1e-4


def test_forecast_distribution_composition():
    cfg = FnoConfig(n=16, tau=2, h=1, delta=0.1, dv=4, L=2, modes_space=4, modes_time=2)
    theta = init_params(cfg, 0)
    alpha = init_cov_params(cfg.n, 8, 0.05, seed=0)
    frames = np.random.default_rng(13).standard_normal((cfg.tau + 1, cfg.n))
    w = HistoryWindow(frames=frames)
    d1 = forecast_distribution(w, theta, alpha, cfg)
    d2 = forecast_distribution(w, theta, alpha, cfg)
    assert np.array_equal(d1.mean, d2.mean)
    assert np.array_equal(d1.mean, fno_forward(frames, theta, cfg))
    assert np.all(d1.sigma > 0)
    assert np.allclose(np.diag(d1.cov), d1.sigma**2 + 1e-6 * np.mean(d1.sigma**2))


def test_prediction_interval_width_and_quantile():
    d = ForecastDist(mean=np.zeros(4), sigma=np.full(4, 2.0))
    lo, hi = prediction_interval(d, 0.95)
    assert np.allclose(hi - lo, 2 * 1.959964 * 2.0, atol=1e-4)
    d1 = ForecastDist(mean=np.zeros(1), sigma=np.ones(1))
    lo, hi = prediction_interval(d1, 0.95)
    assert round(float(hi[0]), 3) == 1.96
    with pytest.raises(ValueError, match="level"):
        prediction_interval(d1, 1.5)


def test_interval_calibration_full_covariance():
    # draws from the exact model covariance; empirical coverage of the
    # nominal 95% marginal intervals over 1e5 point draws
    n = 10
    rng = np.random.default_rng(14)
    sigma = np.exp(rng.uniform(-1, 0.5, n))
    cov = build_covariance(sigma, 0.05)
    L = np.linalg.cholesky(cov)
    mean = rng.standard_normal(n)
    dist = ForecastDist(mean=mean, sigma=np.sqrt(np.diag(cov)))
    lo, hi = prediction_interval(dist, 0.95)
    draws = mean + (L @ rng.standard_normal((n, 10000))).T
    cover = np.mean((draws >= lo) & (draws <= hi))
    assert 0.94 < cover < 0.96
