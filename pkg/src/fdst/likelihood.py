"""Heteroscedastic Gaussian error model: a shallow network mapping the
latest observed frame to a standard-deviation field, a squared-exponential
spatial correlation, the exact negative log-likelihood with analytic
gradients, and the plug-in forecasting distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtri

from .fno import FnoConfig, FnoParams, HistoryWindow, fno_forward

__all__ = [
    "CovParams",
    "CovGrads",
    "ForecastDist",
    "SIGMA_FLOOR",
    "stddev_field",
    "build_covariance",
    "gaussian_nll",
    "nll_gradients",
    "forecast_distribution",
    "prediction_interval",
    "init_cov_params",
]

SIGMA_FLOOR = 1e-4
_JITTER = 1e-6


@dataclass
class CovParams:
    """Shallow tanh network y_k -> sigma plus the correlation range."""

    W1: np.ndarray               # [hidden, n]
    b1: np.ndarray               # [hidden]
    W2: np.ndarray               # [n, hidden]
    b2: np.ndarray               # [n]
    alpha_r: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha_r) and self.alpha_r > 0):
            raise ValueError("alpha_r must be positive")
        for a in (self.W1, self.b1, self.W2, self.b2):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite covariance parameters")

    def named_arrays(self):
        items = [
            ("cov.W1", self.W1),
            ("cov.b1", self.b1),
            ("cov.W2", self.W2),
            ("cov.b2", self.b2),
            ("cov.alpha_r", self._alpha_arr()),
        ]
        return items

    def _alpha_arr(self):
        if not hasattr(self, "_ar"):
            self._ar = np.array([self.alpha_r], dtype=np.float64)
        self._ar[0] = self.alpha_r
        return self._ar

    def sync_alpha(self):
        if hasattr(self, "_ar"):
            self.alpha_r = float(self._ar[0])

    def copy(self) -> "CovParams":
        return CovParams(
            W1=self.W1.copy(),
            b1=self.b1.copy(),
            W2=self.W2.copy(),
            b2=self.b2.copy(),
            alpha_r=float(self.alpha_r),
        )


@dataclass
class CovGrads:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    alpha_r: float


@dataclass
class ForecastDist:
    mean: np.ndarray
    sigma: np.ndarray
    cov: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be strictly positive")
        if self.cov is not None:
            if np.max(np.abs(self.cov - self.cov.T)) > 1e-12:
                raise ValueError("covariance not symmetric")


def _softplus(z):
    return np.logaddexp(0.0, z)


def stddev_field(y_k: np.ndarray, alpha: CovParams, cache: dict | None = None) -> np.ndarray:
    """sigma(y_k) = softplus(W2 tanh(W1 y_k + b1) + b2) + floor."""
    y_k = np.asarray(y_k, dtype=np.float64)
    if not np.all(np.isfinite(y_k)):
        raise ValueError("non-finite input frame")
    t = np.tanh(alpha.W1 @ y_k + alpha.b1)
    z = alpha.W2 @ t + alpha.b2
    sigma = _softplus(z) + SIGMA_FLOOR
    if not np.all(np.isfinite(sigma)):
        raise FloatingPointError("non-finite sigma field")
    if cache is not None:
        cache.update({"y_k": y_k, "t": t, "z": z})
    return sigma


def _pairwise_min_image(n: int) -> np.ndarray:
    s = np.arange(n) / n
    disp = np.abs(s[:, None] - s[None, :])
    return np.minimum(disp, 1.0 - disp)


def build_covariance(sigma: np.ndarray, alpha_r: float, n: int | None = None) -> np.ndarray:
    """Sigma_ij = sigma_i sigma_j exp(-d_ij^2 / (2 alpha_r^2)) over the
    periodic minimum-image grid distance, plus 1e-6*mean(sigma^2) jitter."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    if n is None:
        n = sigma.size
    d = _pairwise_min_image(n)
    corr = np.exp(-(d * d) / (2.0 * alpha_r**2))
    cov = sigma[:, None] * sigma[None, :] * corr
    cov[np.diag_indices(n)] += _JITTER * np.mean(sigma**2)
    return cov


def _chol_with_escalation(Sigma: np.ndarray, sigma: np.ndarray | None):
    base = _JITTER * (np.mean(sigma**2) if sigma is not None else np.mean(np.diag(Sigma)))
    bump = 0.0
    for attempt in range(4):
        try:
            return np.linalg.cholesky(Sigma + bump * np.eye(Sigma.shape[0]))
        except np.linalg.LinAlgError:
            bump = base * 10.0 ** (attempt + 1) if base > 0 else 10.0 ** (attempt - 12)
    raise np.linalg.LinAlgError("covariance not PD")


def gaussian_nll(y: np.ndarray, mu: np.ndarray, Sigma: np.ndarray, sigma: np.ndarray | None = None) -> float:
    """Exact Gaussian negative log-density via Cholesky; log det as twice
    the sum of log pivots, no explicit inverse."""
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    n = y.size
    L = _chol_with_escalation(np.asarray(Sigma, dtype=np.float64), sigma)
    r = y - mu
    half = solve_triangular(L, r, lower=True)
    quad = float(half @ half)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return 0.5 * (quad + logdet + n * np.log(2.0 * np.pi))


def nll_gradients(y: np.ndarray, mu: np.ndarray, y_k: np.ndarray, alpha: CovParams):
    """Analytic gradients of the NLL for one window.

    Returns (nll, grad_mu, CovGrads).  grad_mu = -Sigma^{-1} r; the
    covariance gradient 0.5 (Sigma^{-1} - Sigma^{-1} r r^T Sigma^{-1}) is
    chained to the sigma field, the correlation range, and on through the
    sigma network.  The jitter's dependence on sigma is included so the
    result matches finite differences exactly.
    """
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    n = y.size
    net = {}
    sigma = stddev_field(y_k, alpha, cache=net)
    d = _pairwise_min_image(n)
    corr = np.exp(-(d * d) / (2.0 * alpha.alpha_r**2))
    Sigma = sigma[:, None] * sigma[None, :] * corr
    Sigma[np.diag_indices(n)] += _JITTER * np.mean(sigma**2)

    L = _chol_with_escalation(Sigma, sigma)
    r = y - mu
    Sinv_r = cho_solve((L, True), r)
    Sinv = cho_solve((L, True), np.eye(n))
    quad = float(r @ Sinv_r)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    nll = 0.5 * (quad + logdet + n * np.log(2.0 * np.pi))

    grad_mu = -Sinv_r
    gS = 0.5 * (Sinv - np.outer(Sinv_r, Sinv_r))

    # sigma chain: Sigma_ij = sigma_i sigma_j C_ij (+ jitter on diagonal)
    grad_sigma = 2.0 * (gS * corr) @ sigma
    grad_sigma += np.trace(gS) * (2.0 * _JITTER / n) * sigma
    # range chain: dC/dalpha = C * d^2 / alpha^3
    grad_alpha = float(
        np.sum(gS * sigma[:, None] * sigma[None, :] * corr * d * d) / alpha.alpha_r**3
    )

    # back through softplus(W2 tanh(W1 y + b1) + b2) + floor
    gz = grad_sigma / (1.0 + np.exp(-net["z"]))
    grad_W2 = np.outer(gz, net["t"])
    grad_b2 = gz
    gt = (alpha.W2.T @ gz) * (1.0 - net["t"] ** 2)
    grad_W1 = np.outer(gt, net["y_k"])
    grad_b1 = gt
    return nll, grad_mu, CovGrads(W1=grad_W1, b1=grad_b1, W2=grad_W2, b2=grad_b2, alpha_r=grad_alpha)


def forecast_distribution(
    w: HistoryWindow,
    theta: FnoParams,
    alpha: CovParams,
    cfg: FnoConfig,
    keep_cov: bool = True,
) -> ForecastDist:
    """Plug-in Gaussian forecast: FNO mean, sigma network driven by the most
    recent conditioning frame."""
    mean = fno_forward(w.frames, theta, cfg)
    sigma = stddev_field(w.frames[-1], alpha)
    cov = build_covariance(sigma, alpha.alpha_r) if keep_cov else None
    return ForecastDist(mean=mean, sigma=sigma, cov=cov)


def prediction_interval(dist: ForecastDist, level: float = 0.95):
    """Pointwise marginal interval mean +- z*sigma at the given level."""
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    z = float(ndtri(0.5 * (1.0 + level)))
    return dist.mean - z * dist.sigma, dist.mean + z * dist.sigma


def init_cov_params(n: int, hidden: int, alpha_r: float, seed: int) -> CovParams:
    """Small random network so the initial sigma field is near softplus(0)."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 2**32], dtype=np.uint64)))
    scale1 = 1.0 / np.sqrt(n)
    scale2 = 1.0 / np.sqrt(hidden)
    return CovParams(
        W1=scale1 * 0.1 * rng.standard_normal((hidden, n)),
        b1=np.zeros(hidden),
        W2=scale2 * 0.1 * rng.standard_normal((n, hidden)),
        b2=np.zeros(n),
        alpha_r=alpha_r,
    )
