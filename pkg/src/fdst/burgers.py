"""Training-data generator: 1-D periodic Burgers' equation solved with
explicit Euler stepping from wrapped-Gaussian-process initial conditions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn, kv

from . import io as fio
from .spectral import fft, ifft

__all__ = [
    "MaternConfig",
    "BurgersConfig",
    "FieldSeries",
    "Dataset",
    "matern_chordal_cov",
    "sample_initial_condition",
    "burgers_step",
    "simulate_instance",
    "generate_dataset",
    "load_dataset",
    "instance_rng",
]


@dataclass(frozen=True)
class MaternConfig:
    variance: float = 1.0
    lengthscale: float = 1.0
    smoothness: float = 2.0

    def __post_init__(self):
        if min(self.variance, self.lengthscale, self.smoothness) <= 0:
            raise ValueError("Matern parameters must be positive")


@dataclass(frozen=True)
class BurgersConfig:
    n: int = 256
    T_model: int = 10
    delta: float = 0.1
    gamma_mode: str = "fixed"          # "fixed" or "random_uniform"
    gamma_fixed: float = 0.4
    gamma_lo: float = 0.05
    gamma_hi: float = 0.7
    ic: MaternConfig = field(default_factory=MaternConfig)
    dt_sim: float | None = None        # None: largest stable step (see below)

    def __post_init__(self):
        if self.n < 2 or (self.n & (self.n - 1)):
            raise ValueError("n must be a power of two")
        if self.n > 2048:
            raise ValueError("n above 2^11 not supported")
        if self.T_model < 1 or self.delta <= 0:
            raise ValueError("bad time grid")
        if self.gamma_mode not in ("fixed", "random_uniform"):
            raise ValueError("gamma_mode must be 'fixed' or 'random_uniform'")


@dataclass(frozen=True)
class FieldSeries:
    """One simulated realization: T_model frames of length n, the viscosity
    used, and the grid metadata."""

    values: np.ndarray
    gamma: float
    delta: float
    n: int

    def __post_init__(self):
        if self.values.shape[1] != self.n:
            raise ValueError("shape inconsistent with n")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite field values")


def matern_chordal_cov(s, s_prime, cfg: MaternConfig):
    """Matern covariance at the chordal distance between two points of the
    unit-circumference circle, c = sin(pi*|s - s'|)/pi."""
    s = np.asarray(s, dtype=np.float64)
    s_prime = np.asarray(s_prime, dtype=np.float64)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(s_prime))):
        raise ValueError("non-finite grid positions")
    c = np.sin(np.pi * np.abs(s - s_prime)) / np.pi
    nu, ell, var = cfg.smoothness, cfg.lengthscale, cfg.variance
    c = np.atleast_1d(c)
    out = np.full(c.shape, var, dtype=np.float64)
    pos = c > 0
    r = np.sqrt(2.0 * nu) * c[pos] / ell
    out[pos] = var * (2.0 ** (1.0 - nu) / gamma_fn(nu)) * r**nu * kv(nu, r)
    return out if out.size > 1 else float(out[0])


def sample_initial_condition(cfg: MaternConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draw of the wrapped GP on the n-point grid via circulant
    diagonalization of the covariance."""
    if n < 2 or (n & (n - 1)):
        raise ValueError("n must be a power of two")
    s = np.arange(n) / n
    row = np.asarray(matern_chordal_cov(s, 0.0, cfg))
    lam = fft(row).real
    if lam.min() < -1e-8 * lam.max():
        raise ValueError("covariance not PSD on grid")
    lam = np.clip(lam, 0.0, None)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return np.sqrt(n) * ifft(np.sqrt(lam) * z).real


def stable_dt(gamma: float, u0_max: float, ds: float, delta: float) -> float:
    """Largest step satisfying the combined explicit stability bound
    2*gamma*dt/ds^2 + |u|max*dt/ds <= 0.9, capped by the individual
    diffusive and advective bounds, and divided into delta evenly."""
    umax = u0_max + 1e-6
    dt = 0.9 / (2.0 * gamma / ds**2 + umax / ds) if gamma > 0 else 0.25 * ds / umax
    dt = min(dt, 0.5 * ds**2 / gamma if gamma > 0 else np.inf, 0.25 * ds / umax)
    steps = int(np.ceil(delta / dt))
    return delta / steps


def burgers_step(u: np.ndarray, gamma: float, dt: float, ds: float) -> np.ndarray:
    """One explicit Euler step with backward-difference advection and central
    diffusion, periodic wrap-around."""
    u = np.asarray(u, dtype=np.float64)
    um = np.roll(u, 1)
    up = np.roll(u, -1)
    out = u - (dt / ds) * u * (u - um) + gamma * (dt / ds**2) * (up - 2.0 * u + um)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("simulation diverged")
    return out


def instance_rng(seed: int, instance: int) -> np.random.Generator:
    """Counter-based generator with a documented (seed, instance) stream
    split, reproducible across platforms."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, instance], dtype=np.uint64)))


def simulate_instance(cfg: BurgersConfig, seed: int, instance: int = 0) -> FieldSeries:
    """Simulate one realization; frame k (0-based) is the state at
    t = (k+1)*delta."""
    rng = instance_rng(seed, instance)
    if cfg.gamma_mode == "random_uniform":
        gamma = float(rng.uniform(cfg.gamma_lo, cfg.gamma_hi))
    else:
        gamma = cfg.gamma_fixed
    u = sample_initial_condition(cfg.ic, cfg.n, rng)
    ds = 1.0 / cfg.n
    dt = cfg.dt_sim if cfg.dt_sim is not None else stable_dt(gamma, float(np.max(np.abs(u))), ds, cfg.delta)
    steps = int(round(cfg.delta / dt))
    if abs(steps * dt - cfg.delta) > 1e-9 * cfg.delta:
        raise ValueError("delta must be an integer multiple of dt_sim")
    frames = np.empty((cfg.T_model, cfg.n))
    for k in range(cfg.T_model):
        for j in range(steps):
            try:
                u = burgers_step(u, gamma, dt, ds)
            except FloatingPointError:
                raise FloatingPointError(
                    "simulation diverged at frame %d step %d" % (k, j)
                ) from None
        frames[k] = u
    return FieldSeries(values=frames, gamma=gamma, delta=cfg.delta, n=cfg.n)


@dataclass
class Dataset:
    series: list
    cfg: BurgersConfig
    seed: int
    n_train: int | None = None   # optional train/test split marker

    @property
    def n_instances(self) -> int:
        return len(self.series)

    def train_test(self):
        if self.n_train is None:
            return self.series, []
        return self.series[: self.n_train], self.series[self.n_train :]

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, fs in enumerate(self.series):
            fio.write_tensor(out / ("instance_%04d.fdst" % i), fs.values)
        meta = {
            "n_instances": self.n_instances,
            "T": self.cfg.T_model,
            "n": self.cfg.n,
            "delta": self.cfg.delta,
            "gamma": [fs.gamma for fs in self.series],
            "gamma_mode": self.cfg.gamma_mode,
            "seed": self.seed,
            "split": {"train": self.n_train, "test": self.n_instances - self.n_train}
            if self.n_train is not None
            else None,
        }
        (out / "dataset.json").write_bytes(fio.dump_json(meta))


def generate_dataset(cfg: BurgersConfig, N: int, seed: int, n_train: int | None = None) -> Dataset:
    """Simulate N independent instances; instance i uses the (seed, i) stream."""
    if N < 1:
        raise ValueError("N must be >= 1")
    series = [simulate_instance(cfg, seed, instance=i) for i in range(N)]
    return Dataset(series=series, cfg=cfg, seed=seed, n_train=n_train)


def load_dataset(data_dir) -> Dataset:
    data_dir = Path(data_dir)
    meta = json.loads((data_dir / "dataset.json").read_text())
    cfg = BurgersConfig(
        n=meta["n"],
        T_model=meta["T"],
        delta=meta["delta"],
        gamma_mode=meta.get("gamma_mode", "fixed"),
    )
    series = []
    for i in range(meta["n_instances"]):
        vals = fio.read_tensor(data_dir / ("instance_%04d.fdst" % i))
        series.append(FieldSeries(values=vals, gamma=meta["gamma"][i], delta=meta["delta"], n=meta["n"]))
    n_train = meta["split"]["train"] if meta.get("split") else None
    return Dataset(series=series, cfg=cfg, seed=meta["seed"], n_train=n_train)
