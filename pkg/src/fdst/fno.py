"""Fourier neural operator forward map on the (time, space) grid of a
history window, with hand-derived reverse-mode gradients for every
parameter group.

Layout conventions: hidden states are arrays of shape
``[batch, channels, tau+1, n]``.  The spectral convolution zero-pads the
time axis to the next power of two, takes a half-spectrum FFT over time
and a full FFT over space, multiplies the retained low-frequency modes by
per-mode complex channel-mixing matrices, zeroes everything else, and
inverts.  The retained spatial modes are the ``modes_space`` lowest
positive and lowest negative frequencies; the retained time modes are the
first ``modes_time`` half-spectrum bins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    fft_along_axis,
    ifft_along_axis,
    irfft_along_axis,
    rfft_along_axis,
)

__all__ = [
    "FnoConfig",
    "FnoParams",
    "FnoGrads",
    "HistoryWindow",
    "lift",
    "local_linear",
    "spectral_conv",
    "fno_forward",
    "fno_backward",
    "init_params",
]


def _next_pow2(m: int) -> int:
    p = 1
    while p < m:
        p *= 2
    return p


@dataclass(frozen=True)
class FnoConfig:
    n: int
    tau: int
    h: int
    delta: float
    dv: int
    L: int
    modes_space: int
    modes_time: int
    d: int = 1

    @property
    def time_pad(self) -> int:
        return _next_pow2(self.tau + 1)

    def __post_init__(self):
        if self.d != 1:
            raise ValueError("only spatial dimension 1 is supported")
        if self.dv < self.d + 2:
            raise ValueError("dv must be at least d + 2")
        if self.n < 2 or (self.n & (self.n - 1)):
            raise ValueError("n must be a power of two")
        if not (1 <= self.modes_space <= self.n // 2):
            raise ValueError("modes_space must be in [1, n/2]")
        if not (1 <= self.modes_time <= self.time_pad // 2 + 1):
            raise ValueError("modes_time exceeds the padded half spectrum")
        if self.tau < 0 or self.h < 1 or self.L < 1 or self.delta <= 0:
            raise ValueError("bad configuration")


@dataclass
class HistoryWindow:
    """The (tau+1)-frame conditioning input and, during training, the
    h-step-ahead target frame."""

    frames: np.ndarray               # [tau+1, n]
    target: np.ndarray | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("non-finite frames")
        if self.target is not None:
            self.target = np.asarray(self.target, dtype=np.float64)


@dataclass
class FnoParams:
    H_P: np.ndarray                  # [dv, d+2]
    b_P: np.ndarray                  # [dv]
    A_W: list                        # L x [dv, dv]
    b_W: list                        # L x [dv]
    F_K: list                        # L x complex [dv, dv, 2*modes_space, modes_time]
    h_Q: np.ndarray                  # [dv]
    b_Q: float

    def named_arrays(self):
        """Flat (name, array) view used by the optimizer and checkpoints.
        b_Q is exposed as a length-1 array alias."""
        items = [("H_P", self.H_P), ("b_P", self.b_P)]
        for l in range(len(self.A_W)):
            items += [
                ("A_W.%d" % l, self.A_W[l]),
                ("b_W.%d" % l, self.b_W[l]),
                ("F_K.%d" % l, self.F_K[l]),
            ]
        items += [("h_Q", self.h_Q), ("b_Q", self._b_Q_arr())]
        return items

    def _b_Q_arr(self):
        if not hasattr(self, "_bq"):
            self._bq = np.array([self.b_Q], dtype=np.float64)
        self._bq[0] = self.b_Q
        return self._bq

    def sync_b_Q(self):
        if hasattr(self, "_bq"):
            self.b_Q = float(self._bq[0])

    def copy(self) -> "FnoParams":
        return FnoParams(
            H_P=self.H_P.copy(),
            b_P=self.b_P.copy(),
            A_W=[a.copy() for a in self.A_W],
            b_W=[b.copy() for b in self.b_W],
            F_K=[f.copy() for f in self.F_K],
            h_Q=self.h_Q.copy(),
            b_Q=float(self.b_Q),
        )


@dataclass
class FnoGrads:
    H_P: np.ndarray
    b_P: np.ndarray
    A_W: list
    b_W: list
    F_K: list
    h_Q: np.ndarray
    b_Q: float
    frames: np.ndarray | None = None


def _coords(cfg: FnoConfig):
    s = np.arange(cfg.n) / cfg.n
    t = np.arange(cfg.tau + 1) * cfg.delta
    return s, t


def lift(frames: np.ndarray, H_P: np.ndarray, b_P: np.ndarray, cfg: FnoConfig) -> np.ndarray:
    """Pointwise affine map of (s, t, Y(s,t)) into dv channels."""
    frames = np.asarray(frames, dtype=np.float64)
    squeeze = frames.ndim == 2
    if squeeze:
        frames = frames[None]
    if frames.shape[1:] != (cfg.tau + 1, cfg.n):
        raise ValueError("frames shape mismatch")
    s, t = _coords(cfg)
    v = (
        H_P[None, :, 0, None, None] * s[None, None, None, :]
        + H_P[None, :, 1, None, None] * t[None, None, :, None]
        + H_P[None, :, 2, None, None] * frames[:, None, :, :]
        + b_P[None, :, None, None]
    )
    return v[0] if squeeze else v


def local_linear(v: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise channel mixing A v(x) + b over the whole grid."""
    squeeze = v.ndim == 3
    if squeeze:
        v = v[None]
    if A.shape != (v.shape[1], v.shape[1]):
        raise ValueError("channel mixing shape mismatch")
    out = np.einsum("oc,bcts->bots", A, v) + b[None, :, None, None]
    return out[0] if squeeze else out


def _half_weights(cfg: FnoConfig) -> np.ndarray:
    """Parseval weights for the time half spectrum: 1 at DC and Nyquist,
    2 at the doubly-counted middle bins."""
    Tp = cfg.time_pad
    D = np.full(Tp // 2 + 1, 2.0)
    D[0] = 1.0
    if Tp > 1:
        D[-1] = 1.0
    return D


def _spectral_forward(v: np.ndarray, F_K: np.ndarray, cfg: FnoConfig):
    B, dv, Tt, n = v.shape
    Tp = cfg.time_pad
    m1, m2 = cfg.modes_space, cfg.modes_time
    vp = np.zeros((B, dv, Tp, n))
    vp[:, :, :Tt, :] = v
    X = fft_along_axis(rfft_along_axis(vp, axis=2), axis=3)
    Xsel = np.concatenate([X[:, :, :m2, :m1], X[:, :, :m2, n - m1 :]], axis=3)
    Ysel = np.einsum("oikt,bitk->botk", F_K, Xsel)
    Y = np.zeros_like(X)
    Y[:, :, :m2, :m1] = Ysel[:, :, :, :m1]
    Y[:, :, :m2, n - m1 :] = Ysel[:, :, :, m1:]
    out = irfft_along_axis(ifft_along_axis(Y, axis=3), axis=2, m=Tp)
    return out[:, :, :Tt, :], Xsel


def spectral_conv(v: np.ndarray, F_K: np.ndarray, cfg: FnoConfig) -> np.ndarray:
    """Spectral mixing layer; input and output are real fields."""
    squeeze = v.ndim == 3
    if squeeze:
        v = v[None]
    if F_K.shape != (v.shape[1], v.shape[1], 2 * cfg.modes_space, cfg.modes_time):
        raise ValueError("spectral weight shape mismatch")
    out, _ = _spectral_forward(v, F_K, cfg)
    return out[0] if squeeze else out


def _spectral_backward(g: np.ndarray, F_K: np.ndarray, Xsel: np.ndarray, cfg: FnoConfig):
    """Adjoint of _spectral_forward: gradients w.r.t. the spectral weights
    (summed over the batch) and w.r.t. the layer input."""
    B, dv, Tt, n = g.shape
    Tp = cfg.time_pad
    m1, m2 = cfg.modes_space, cfg.modes_time
    D = _half_weights(cfg)
    gp = np.zeros((B, dv, Tp, n))
    gp[:, :, :Tt, :] = g
    G = rfft_along_axis(gp, axis=2) * D[None, None, :, None]
    G = fft_along_axis(G, axis=3) / (n * Tp)
    Gsel = np.concatenate([G[:, :, :m2, :m1], G[:, :, :m2, n - m1 :]], axis=3)
    grad_F = np.einsum("botk,bitk->oikt", Gsel, np.conj(Xsel))
    grad_Xsel = np.einsum("oikt,botk->bitk", np.conj(F_K), Gsel)
    gX = np.zeros((B, dv, Tp // 2 + 1, n), dtype=np.complex128)
    gX[:, :, :m2, :m1] = grad_Xsel[:, :, :, :m1]
    gX[:, :, :m2, n - m1 :] = grad_Xsel[:, :, :, m1:]
    gX = ifft_along_axis(gX, axis=3) / D[None, None, :, None]
    grad_vp = (n * Tp) * irfft_along_axis(gX, axis=2, m=Tp)
    return grad_F, grad_vp[:, :, :Tt, :]


def fno_forward(frames: np.ndarray, params: FnoParams, cfg: FnoConfig, cache: dict | None = None):
    """Evaluate the operator on one window or a batch of windows.

    Input [tau+1, n] (or [B, tau+1, n]) -> forecast [n] (or [B, n]),
    the projected field at the final time index.  Pass a dict as ``cache``
    to retain intermediates for fno_backward.
    """
    frames = np.asarray(frames, dtype=np.float64)
    squeeze = frames.ndim == 2
    if squeeze:
        frames = frames[None]
    v = lift(frames, params.H_P, params.b_P, cfg)
    layers = []
    for l in range(cfg.L):
        w_out = local_linear(v, params.A_W[l], params.b_W[l])
        s_out, Xsel = _spectral_forward(v, params.F_K[l], cfg)
        pre = w_out + s_out
        mask = pre > 0
        v_next = np.where(mask, pre, 0.0)
        layers.append({"v_in": v, "Xsel": Xsel, "mask": mask})
        v = v_next
    q = np.einsum("c,bcts->bts", params.h_Q, v) + params.b_Q
    out = q[:, cfg.tau, :]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("forward overflow")
    if cache is not None:
        cache.update({"frames": frames, "layers": layers, "v_last": v})
    return out[0] if squeeze else out


def fno_backward(
    frames: np.ndarray,
    params: FnoParams,
    cfg: FnoConfig,
    upstream: np.ndarray,
    cache: dict | None = None,
    want_input_grad: bool = False,
) -> FnoGrads:
    """Reverse-mode gradients of <upstream, forecast> for every parameter
    group, summed over the batch.  ReLU subgradient at 0 is taken as 0."""
    frames = np.asarray(frames, dtype=np.float64)
    squeeze = frames.ndim == 2
    if squeeze:
        frames = frames[None]
    upstream = np.asarray(upstream, dtype=np.float64)
    if squeeze:
        upstream = upstream[None]
    if cache is None or "layers" not in cache:
        cache = {}
        fno_forward(frames, params, cfg, cache=cache)
    layers, v_last = cache["layers"], cache["v_last"]

    B = frames.shape[0]
    grad_q = np.zeros((B, cfg.tau + 1, cfg.n))
    grad_q[:, cfg.tau, :] = upstream
    grad_hQ = np.einsum("bts,bcts->c", grad_q, v_last)
    grad_bQ = float(grad_q.sum())
    grad_v = params.h_Q[None, :, None, None] * grad_q[:, None, :, :]

    grad_A = [None] * cfg.L
    grad_bW = [None] * cfg.L
    grad_F = [None] * cfg.L
    for l in range(cfg.L - 1, -1, -1):
        lay = layers[l]
        grad_pre = grad_v * lay["mask"]
        grad_A[l] = np.einsum("bots,bcts->oc", grad_pre, lay["v_in"])
        grad_bW[l] = grad_pre.sum(axis=(0, 2, 3))
        grad_local = np.einsum("oc,bots->bcts", params.A_W[l], grad_pre)
        grad_F[l], grad_spec = _spectral_backward(grad_pre, params.F_K[l], lay["Xsel"], cfg)
        grad_v = grad_local + grad_spec

    s, t = _coords(cfg)
    grad_HP = np.zeros_like(params.H_P)
    grad_HP[:, 0] = np.einsum("bcts,s->c", grad_v, s)
    grad_HP[:, 1] = np.einsum("bcts,t->c", grad_v, t)
    grad_HP[:, 2] = np.einsum("bcts,bts->c", grad_v, cache["frames"])
    grad_bP = grad_v.sum(axis=(0, 2, 3))
    grad_frames = None
    if want_input_grad:
        grad_frames = np.einsum("c,bcts->bts", params.H_P[:, 2], grad_v)
        if squeeze:
            grad_frames = grad_frames[0]
    return FnoGrads(
        H_P=grad_HP,
        b_P=grad_bP,
        A_W=grad_A,
        b_W=grad_bW,
        F_K=grad_F,
        h_Q=grad_hQ,
        b_Q=grad_bQ,
        frames=grad_frames,
    )


def _uniform(rng, fan_in, fan_out, shape):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_params(cfg: FnoConfig, seed: int) -> FnoParams:
    """Glorot-uniform real weights, scaled complex-normal spectral weights,
    zero biases; deterministic per seed."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    dv = cfg.dv
    m1, m2 = cfg.modes_space, cfg.modes_time
    scale = 1.0 / (dv * np.sqrt(2.0 * m1 * m2))
    A_W, b_W, F_K = [], [], []
    H_P = _uniform(rng, cfg.d + 2, dv, (dv, cfg.d + 2))
    for _ in range(cfg.L):
        A_W.append(_uniform(rng, dv, dv, (dv, dv)))
        b_W.append(np.zeros(dv))
        re = rng.standard_normal((dv, dv, 2 * m1, m2))
        im = rng.standard_normal((dv, dv, 2 * m1, m2))
        F_K.append(scale / np.sqrt(2.0) * (re + 1j * im))
    h_Q = _uniform(rng, dv, 1, (dv,))
    return FnoParams(H_P=H_P, b_P=np.zeros(dv), A_W=A_W, b_W=b_W, F_K=F_K, h_Q=h_Q, b_Q=0.0)
