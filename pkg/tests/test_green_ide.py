"""Advection-diffusion kernel: closed form vs quadrature oracle, propagator
properties, and the linear forecast."""

import numpy as np
import pytest

from fdst.green_ide import (
    GammaParams,
    build_propagator,
    green_kernel,
    green_kernel_quadrature,
    ide_forecast,
)


def test_kernel_is_normalized_density():
    p = GammaParams(0.3, 0.5)
    tau = 0.4
    # Riemann sum over a wide window; the kernel decays as a Gaussian
    r = np.linspace(-8, 8, 200001)
    total = np.trapezoid(green_kernel(r, tau, p), r)
    assert abs(total - 1.0) < 1e-10


def test_kernel_peak_location_tracks_drift():
    p = GammaParams(0.7, 0.2)
    tau = 0.5
    r = np.linspace(-2, 2, 40001)
    vals = green_kernel(r, tau, p)
    assert abs(r[np.argmax(vals)] - tau * p.gamma1) < 1e-3


def test_closed_form_matches_quadrature():
    rng = np.random.default_rng(12)
    for _ in range(3):
        p = GammaParams(float(rng.uniform(-1, 1)), float(rng.uniform(0.1, 1.0)))
        tau = float(rng.uniform(0.2, 1.0))
        for r in np.linspace(-2.0, 2.0, 21):
            cf = green_kernel(r, tau, p)
            quad = green_kernel_quadrature(r, tau, p)
            assert abs(cf - quad) < 1e-6


def test_degenerate_kernel_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        GammaParams(0.0, 0.0)
    p = GammaParams(0.0, 0.1)
    with pytest.raises(ValueError, match="degenerate"):
        green_kernel(0.0, 0.0, p)


def test_propagator_rows_sum_to_one():
    # kernel std must sit between the grid spacing and the domain period
    # for the minimum-image evaluation to hold mass
    p = GammaParams(0.1, 0.01)
    prop = build_propagator(64, 0.5, p)
    rows = prop.matrix.sum(axis=1)
    assert np.max(np.abs(rows - 1.0)) < 1e-2
    assert np.all(prop.matrix >= 0)


def test_propagator_rejects_unresolved_kernel():
    # std sqrt(2*gamma2*h*delta) below two grid spacings
    with pytest.raises(ValueError, match="narrower than grid"):
        build_propagator(256, 0.01, GammaParams(0.0, 0.001))


def test_propagator_is_circulant():
    prop = build_propagator(32, 0.5, GammaParams(0.05, 0.01))
    m = prop.matrix
    for i in range(1, 32):
        assert np.allclose(m[i], np.roll(m[0], i), atol=1e-14)


def test_ide_forecast_constant_field_preserved():
    prop = build_propagator(64, 0.5, GammaParams(0.0, 0.01))
    y = np.full(64, 3.0)
    out = ide_forecast(y, prop)
    # row sums are not renormalized, so constancy holds to the row-sum tol
    assert np.max(np.abs(out - 3.0)) < 3.0 * 1e-2


def test_sine_mode_decay_rate():
    # a pure sine is an eigenfunction of the periodic diffusion propagator
    # with eigenvalue exp(-4 pi^2 gamma2 t) (gamma1 = 0)
    n, gamma2, t = 128, 0.02, 0.5
    prop = build_propagator(n, t, GammaParams(0.0, gamma2))
    s = np.arange(n) / n
    y = np.sin(2 * np.pi * s)
    out = ide_forecast(y, prop)
    amp = 2.0 * np.abs(np.fft.fft(out)[1]) / n
    expected = np.exp(-4.0 * np.pi**2 * gamma2 * t)
    assert abs(amp - expected) / expected < 0.02


def test_forecast_shape_validation():
    prop = build_propagator(32, 0.5, GammaParams(0.0, 0.01))
    with pytest.raises(ValueError, match="length"):
        ide_forecast(np.zeros(16), prop)
