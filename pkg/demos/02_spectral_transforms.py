"""Tour of the transform layer: the radix-2 FFT against the naive DFT, the
half-spectrum variant, and what mode truncation does to a field.

Run:  python demos/02_spectral_transforms.py
"""

import numpy as np

from fdst.spectral import dft_naive, fft, ifft, irfft_last_axis, rfft_last_axis

rng = np.random.default_rng(0)

# dual-route check: the O(m log m) and O(m^2) paths agree
x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
print("fft vs naive DFT, max abs diff: %.3e" % np.max(np.abs(fft(x) - dft_naive(x))))

# round trip
print("ifft(fft(x)) residual:          %.3e" % np.max(np.abs(ifft(fft(x)) - x)))

# a real signal needs only half the spectrum
u = rng.standard_normal(128)
half = rfft_last_axis(u)
print("half-spectrum bins for m=128:  ", half.shape[-1])
print("irfft round-trip residual:      %.3e" % np.max(np.abs(irfft_last_axis(half, m=128) - u)))

# low-pass by zeroing everything above mode 8, the FNO's truncation in
# miniature
kept = half.copy()
kept[9:] = 0.0
smooth = irfft_last_axis(kept, m=128)
print("\nenergy kept by an 8-mode low-pass: %.1f%%" % (100 * np.sum(smooth**2) / np.sum(u**2)))
