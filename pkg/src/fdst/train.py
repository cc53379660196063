"""Window extraction, joint Adam training of the operator and the error
model, and bitwise-exact checkpointing.

Training runs in two stages: a mean-squared-error warmup that touches only
the operator parameters, then joint negative-log-likelihood descent over
both parameter groups.  All randomness flows from counter-based streams
keyed on the seed, so a repeated run is bit-identical.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import io as fio
from .burgers import Dataset
from .fno import FnoConfig, FnoGrads, FnoParams, HistoryWindow, fno_backward, fno_forward, init_params
from .likelihood import CovGrads, CovParams, init_cov_params, nll_gradients

__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainingLog",
    "make_windows",
    "adam_step",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

CKPT_MAGIC = b"FDSTCKPT"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch: int = 32
    epochs: int = 20
    seed: int = 0
    warmup_mse_epochs: int = 2
    grad_clip: float = 10.0

    def __post_init__(self):
        if self.lr <= 0 or self.batch < 1 or self.epochs < 0:
            raise ValueError("bad training configuration")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)

    def append(self, rec: dict, path=None):
        self.records.append(rec)
        if path is not None:
            with open(path, "ab") as fh:
                fh.write(fio.dump_json(rec) + b"\n")


def make_windows(ds: Dataset, tau: int, h: int):
    """All (tau+1)-frame conditioning windows with their h-ahead targets.
    Frame j of an instance is the state at t = (j+1)*delta; usable anchor
    frames give T - h - tau windows per instance."""
    windows = []
    for fs in ds.series:
        T = fs.values.shape[0]
        if T <= tau + h:
            raise ValueError("series too short")
        # anchor index k runs over tau..T-h-1 in 0-based frame numbering
        for k in range(tau, T - h):
            windows.append(
                HistoryWindow(frames=fs.values[k - tau : k + 1], target=fs.values[k + h])
            )
    return windows


def _float_view(arr: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(arr):
        return arr.view(np.float64)
    return arr


def adam_step(named_params, named_grads, state: AdamState, cfg: TrainConfig) -> None:
    """One in-place Adam update with bias correction.  Complex arrays are
    treated as pairs of independent real components via a float view."""
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for (name, p), (gname, g) in zip(named_params, named_grads):
        if name != gname:
            raise ValueError("parameter/gradient order mismatch")
        pv = _float_view(p)
        gv = _float_view(np.ascontiguousarray(g))
        if not np.all(np.isfinite(gv)):
            raise FloatingPointError("non-finite gradient for %s" % name)
        if name not in state.m:
            state.m[name] = np.zeros_like(pv)
            state.v[name] = np.zeros_like(pv)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * gv
        v *= b2
        v += (1.0 - b2) * gv * gv
        pv -= cfg.lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.eps)


def _named_grads_fno(g: FnoGrads):
    items = [("H_P", g.H_P), ("b_P", g.b_P)]
    for l in range(len(g.A_W)):
        items += [("A_W.%d" % l, g.A_W[l]), ("b_W.%d" % l, g.b_W[l]), ("F_K.%d" % l, g.F_K[l])]
    items += [("h_Q", g.h_Q), ("b_Q", np.array([g.b_Q]))]
    return items


def _named_grads_cov(g: CovGrads):
    return [
        ("cov.W1", g.W1),
        ("cov.b1", g.b1),
        ("cov.W2", g.W2),
        ("cov.b2", g.b2),
        ("cov.alpha_r", np.array([g.alpha_r])),
    ]


def _clip_global(named_grads, max_norm: float):
    if max_norm <= 0:
        return 1.0
    total = 0.0
    for _, g in named_grads:
        gv = _float_view(np.ascontiguousarray(g))
        total += float(np.sum(gv * gv))
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        return scale
    return 1.0


def _scale_grads(named_grads, scale: float):
    if scale == 1.0:
        return named_grads
    return [(name, g * scale) for name, g in named_grads]


def train(
    ds: Dataset,
    fno_cfg: FnoConfig,
    train_cfg: TrainConfig,
    cov_hidden: int = 64,
    alpha_r_init: float = 0.1,
    theta: FnoParams | None = None,
    alpha: CovParams | None = None,
    log_path=None,
):
    """Two-stage maximum-likelihood fit.  Returns (theta, alpha, log) with
    the best-NLL parameters seen (best-MSE if the run is warmup only)."""
    train_series, _ = ds.train_test()
    sub = Dataset(series=train_series, cfg=ds.cfg, seed=ds.seed)
    windows = make_windows(sub, fno_cfg.tau, fno_cfg.h)
    if not windows:
        raise ValueError("no training windows")
    frames = np.stack([w.frames for w in windows])
    targets = np.stack([w.target for w in windows])
    n_win, n = len(windows), fno_cfg.n

    if theta is None:
        theta = init_params(fno_cfg, train_cfg.seed)
    if alpha is None:
        alpha = init_cov_params(n, cov_hidden, alpha_r_init, train_cfg.seed)
    state = AdamState()
    shuffle_rng = np.random.Generator(
        np.random.Philox(key=np.array([train_cfg.seed, 2**48], dtype=np.uint64))
    )
    log = TrainingLog()
    best = {"metric": np.inf, "theta": theta.copy(), "alpha": alpha.copy()}
    t0 = time.monotonic()
    step = 0
    for epoch in range(train_cfg.epochs):
        warmup = epoch < train_cfg.warmup_mse_epochs
        order = shuffle_rng.permutation(n_win)
        ep_nll, ep_mse, ep_count = 0.0, 0.0, 0
        for lo in range(0, n_win, train_cfg.batch):
            idx = order[lo : lo + train_cfg.batch]
            bf, bt = frames[idx], targets[idx]
            B = len(idx)
            cache = {}
            mu = fno_forward(bf, theta, fno_cfg, cache=cache)
            resid = mu - bt
            mse = float(np.mean(resid**2))
            if warmup:
                upstream = (2.0 / (B * n)) * resid
                g_fno = fno_backward(bf, theta, fno_cfg, upstream, cache=cache)
                named_g = _named_grads_fno(g_fno)
                named_p = theta.named_arrays()
                nll_val = np.nan
            else:
                grad_mu = np.empty_like(mu)
                cg_sum = None
                nll_sum = 0.0
                for j in range(B):
                    nll_j, gmu_j, cg_j = nll_gradients(bt[j], mu[j], bf[j, -1], alpha)
                    nll_sum += nll_j
                    grad_mu[j] = gmu_j
                    if cg_sum is None:
                        cg_sum = cg_j
                    else:
                        cg_sum.W1 += cg_j.W1
                        cg_sum.b1 += cg_j.b1
                        cg_sum.W2 += cg_j.W2
                        cg_sum.b2 += cg_j.b2
                        cg_sum.alpha_r += cg_j.alpha_r
                nll_val = nll_sum / B
                g_fno = fno_backward(bf, theta, fno_cfg, grad_mu / B, cache=cache)
                cg = CovGrads(
                    W1=cg_sum.W1 / B,
                    b1=cg_sum.b1 / B,
                    W2=cg_sum.W2 / B,
                    b2=cg_sum.b2 / B,
                    alpha_r=cg_sum.alpha_r / B,
                )
                named_g = _named_grads_fno(g_fno) + _named_grads_cov(cg)
                named_p = theta.named_arrays() + alpha.named_arrays()
            scale = _clip_global(named_g, train_cfg.grad_clip)
            named_g = _scale_grads(named_g, scale)
            try:
                adam_step(named_p, named_g, state, train_cfg)
            except FloatingPointError as exc:
                raise FloatingPointError(
                    "training diverged at epoch %d step %d: %s" % (epoch, step, exc)
                ) from None
            theta.sync_b_Q()
            alpha.sync_alpha()
            ep_mse += mse * B
            if not warmup:
                ep_nll += nll_val * B
            ep_count += B
            step += 1
        mean_mse = ep_mse / ep_count
        mean_nll = (ep_nll / ep_count) if not warmup else float("nan")
        log.append(
            {
                "epoch": epoch,
                "step": step,
                "nll": None if warmup else mean_nll,
                "mse": mean_mse,
                "wallclock_s": round(time.monotonic() - t0, 3),
            },
            path=log_path,
        )
        metric = mean_mse if warmup else mean_nll
        if not np.isfinite(metric):
            raise FloatingPointError("training diverged at epoch %d step %d" % (epoch, step))
        # NLL-stage checkpoints always take precedence over warmup ones
        if not warmup and best.get("stage") != "nll":
            best = {"metric": np.inf, "theta": best["theta"], "alpha": best["alpha"], "stage": "nll"}
        if metric < best["metric"]:
            best.update({"metric": metric, "theta": theta.copy(), "alpha": alpha.copy()})
    if train_cfg.epochs == 0:
        return theta, alpha, log
    return best["theta"], best["alpha"], log


# ---------------------------------------------------------------------------
# checkpoints: length-prefixed canonical JSON header, then FDST1 blocks
# ---------------------------------------------------------------------------


def _fno_cfg_dict(cfg: FnoConfig) -> dict:
    return {
        "n": cfg.n,
        "tau": cfg.tau,
        "h": cfg.h,
        "delta": cfg.delta,
        "dv": cfg.dv,
        "L": cfg.L,
        "modes_space": cfg.modes_space,
        "modes_time": cfg.modes_time,
        "d": cfg.d,
    }


def save_checkpoint(theta: FnoParams, alpha: CovParams, state: AdamState | None, path, fno_cfg: FnoConfig, train_cfg: TrainConfig | None = None) -> None:
    arrays = theta.named_arrays() + alpha.named_arrays()
    if state is not None:
        for name in sorted(state.m):
            arrays.append(("adam.m." + name, state.m[name]))
            arrays.append(("adam.v." + name, state.v[name]))
    header = {
        "version": CKPT_VERSION,
        "fno_cfg": _fno_cfg_dict(fno_cfg),
        "train_cfg": None
        if train_cfg is None
        else {
            "lr": train_cfg.lr,
            "beta1": train_cfg.beta1,
            "beta2": train_cfg.beta2,
            "eps": train_cfg.eps,
            "batch": train_cfg.batch,
            "epochs": train_cfg.epochs,
            "seed": train_cfg.seed,
            "warmup_mse_epochs": train_cfg.warmup_mse_epochs,
            "grad_clip": train_cfg.grad_clip,
        },
        "adam_step": 0 if state is None else state.step,
        "cov_hidden": alpha.W1.shape[0],
        "names": [name for name, _ in arrays],
    }
    blob = fio.dump_json(header)
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in arrays:
            fio.write_tensor_stream(fh, arr)


def load_checkpoint(path, expect_fno_cfg: FnoConfig | None = None):
    """Returns (theta, alpha, state, fno_cfg).  Raises on corrupt files and
    on a configuration that disagrees with expect_fno_cfg."""
    import json

    with open(path, "rb") as fh:
        magic = fh.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise fio.FormatError("bad checkpoint magic: %r" % magic)
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen))
        if header.get("version") != CKPT_VERSION:
            raise fio.FormatError("unsupported checkpoint version")
        tensors = {}
        for name in header["names"]:
            tensors[name] = fio.read_tensor_stream(fh)
    cd = header["fno_cfg"]
    fno_cfg = FnoConfig(
        n=cd["n"],
        tau=cd["tau"],
        h=cd["h"],
        delta=cd["delta"],
        dv=cd["dv"],
        L=cd["L"],
        modes_space=cd["modes_space"],
        modes_time=cd["modes_time"],
        d=cd.get("d", 1),
    )
    if expect_fno_cfg is not None and _fno_cfg_dict(fno_cfg) != _fno_cfg_dict(expect_fno_cfg):
        raise ValueError("config mismatch")
    theta = FnoParams(
        H_P=tensors["H_P"],
        b_P=tensors["b_P"],
        A_W=[tensors["A_W.%d" % l] for l in range(fno_cfg.L)],
        b_W=[tensors["b_W.%d" % l] for l in range(fno_cfg.L)],
        F_K=[tensors["F_K.%d" % l] for l in range(fno_cfg.L)],
        h_Q=tensors["h_Q"],
        b_Q=float(tensors["b_Q"][0]),
    )
    alpha = CovParams(
        W1=tensors["cov.W1"],
        b1=tensors["cov.b1"],
        W2=tensors["cov.W2"],
        b2=tensors["cov.b2"],
        alpha_r=float(tensors["cov.alpha_r"][0]),
    )
    state = AdamState(step=header.get("adam_step", 0))
    for name in header["names"]:
        if name.startswith("adam.m."):
            state.m[name[len("adam.m.") :]] = tensors[name]
        elif name.startswith("adam.v."):
            state.v[name[len("adam.v.") :]] = tensors[name]
    return theta, alpha, state, fno_cfg
