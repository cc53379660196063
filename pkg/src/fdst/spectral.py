"""Discrete Fourier transforms: a naive quadratic-cost reference and a
radix-2 Cooley-Tukey FFT, in one and several dimensions, plus a
half-spectrum variant for real input.

Conventions: the forward transform is unnormalized,
``U[k] = sum_x u[x] exp(-2*pi*i*k*x/m)``, and the inverse carries the
``1/m`` factor.  All FFT paths require power-of-two lengths.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "dft_naive",
    "fft",
    "ifft",
    "fft_nd",
    "ifft_nd",
    "rfft_last_axis",
    "irfft_last_axis",
    "fft_along_axis",
    "ifft_along_axis",
    "rfft_along_axis",
    "irfft_along_axis",
]


def _check_pow2(m: int) -> None:
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError("fft size must be 2^q")


def dft_naive(x) -> np.ndarray:
    """Direct O(m^2) DFT of a 1-D sequence; the correctness oracle for fft."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("empty signal")
    m = x.size
    out = np.empty(m, dtype=np.complex128)
    grid = np.arange(m)
    for k in range(m):
        out[k] = np.sum(x * np.exp(-2j * np.pi * k * grid / m))
    return out


def _bit_reverse_indices(m: int) -> np.ndarray:
    idx = np.arange(m)
    rev = np.zeros(m, dtype=np.intp)
    bits = m.bit_length() - 1
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


# twiddle-factor cache keyed by (span, inverse)
_TWIDDLE: dict[tuple[int, bool], np.ndarray] = {}
_BITREV: dict[int, np.ndarray] = {}


def _twiddles(span: int, inverse: bool) -> np.ndarray:
    key = (span, inverse)
    w = _TWIDDLE.get(key)
    if w is None:
        sign = 1.0 if inverse else -1.0
        w = np.exp(sign * 1j * np.pi * np.arange(span) / span)
        _TWIDDLE[key] = w
    return w


def _fft_last_axis_core(a: np.ndarray, inverse: bool) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey along the last axis, vectorized over
    all leading axes.  Input must already be complex128 and power-of-two."""
    m = a.shape[-1]
    if m == 1:
        return a.copy()
    rev = _BITREV.get(m)
    if rev is None:
        rev = _bit_reverse_indices(m)
        _BITREV[m] = rev
    y = np.ascontiguousarray(a[..., rev])
    lead = y.shape[:-1]
    span = 1
    while span < m:
        w = _twiddles(span, inverse)
        blocks = y.reshape(*lead, m // (2 * span), 2, span)
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :]
        t = odd * w
        np.subtract(even, t, out=odd)
        even += t
        span *= 2
    return y


def fft(x) -> np.ndarray:
    """Radix-2 FFT of a 1-D complex sequence (unnormalized forward)."""
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        raise ValueError("empty signal")
    _check_pow2(x.shape[-1])
    return _fft_last_axis_core(x, inverse=False)


def ifft(x) -> np.ndarray:
    """Inverse FFT, carrying the 1/m normalization."""
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        raise ValueError("empty signal")
    m = x.shape[-1]
    _check_pow2(m)
    return _fft_last_axis_core(x, inverse=True) / m


def fft_along_axis(t: np.ndarray, axis: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.complex128)
    moved = np.moveaxis(t, axis, -1)
    _check_pow2(moved.shape[-1])
    out = _fft_last_axis_core(moved, inverse=False)
    return np.moveaxis(out, -1, axis)


def ifft_along_axis(t: np.ndarray, axis: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.complex128)
    moved = np.moveaxis(t, axis, -1)
    m = moved.shape[-1]
    _check_pow2(m)
    out = _fft_last_axis_core(moved, inverse=True) / m
    return np.moveaxis(out, -1, axis)


def fft_nd(t: np.ndarray, axes) -> np.ndarray:
    """Separable multi-axis FFT; the result does not depend on axis order."""
    out = np.asarray(t, dtype=np.complex128)
    for ax in axes:
        out = fft_along_axis(out, ax)
    return out


def ifft_nd(t: np.ndarray, axes) -> np.ndarray:
    out = np.asarray(t, dtype=np.complex128)
    for ax in axes:
        out = ifft_along_axis(out, ax)
    return out


def rfft_last_axis(t: np.ndarray) -> np.ndarray:
    """FFT of real input along the last axis, keeping the m/2+1 nonnegative
    frequencies (the rest follow by conjugate symmetry)."""
    t = np.asarray(t, dtype=np.float64)
    m = t.shape[-1]
    _check_pow2(m)
    full = _fft_last_axis_core(t.astype(np.complex128), inverse=False)
    return np.ascontiguousarray(full[..., : m // 2 + 1])


def irfft_last_axis(x: np.ndarray, m: int | None = None) -> np.ndarray:
    """Inverse of rfft_last_axis.  The spectrum is extended by conjugate
    symmetry; the DC and Nyquist bins are taken as real (their imaginary
    parts carry no information for a real signal)."""
    x = np.asarray(x, dtype=np.complex128)
    half = x.shape[-1]
    if m is None:
        m = 2 * (half - 1)
    _check_pow2(m)
    if half != m // 2 + 1:
        raise ValueError("half spectrum length must be m/2+1")
    full = np.empty(x.shape[:-1] + (m,), dtype=np.complex128)
    full[..., :half] = x
    full[..., 0] = x[..., 0].real
    if m > 1:
        full[..., m // 2] = x[..., m // 2].real
        full[..., half:] = np.conj(x[..., m // 2 - 1 : 0 : -1])
    out = _fft_last_axis_core(full, inverse=True) / m
    return np.ascontiguousarray(out.real)


def rfft_along_axis(t: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(np.asarray(t, dtype=np.float64), axis, -1)
    return np.moveaxis(rfft_last_axis(moved), -1, axis)


def irfft_along_axis(x: np.ndarray, axis: int, m: int | None = None) -> np.ndarray:
    moved = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, -1)
    return np.moveaxis(irfft_last_axis(moved, m=m), -1, axis)
