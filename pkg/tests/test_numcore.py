"""Grids, pulses, transforms and closed-form transfer functions."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.special import j1 as scipy_j1

from qmemsim.numcore import (AliasRisk, ComplexEnvelope, DetuningDistribution,
                             GridTooShort, PulseShape, TimeGrid,
                             TransferFunction, apply_transfer,
                             forward_transform, inverse_transform,
                             render_pulse, shaded_area_efficiency)
import oracles


# ---------------------------------------------------------------------------
# grids and pulses
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(0.0, -0.1, 64)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 0.1, 4)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 0.1, 100)  # not a power of two


def test_gaussian_peak_amplitude():
    sigma = 10.0
    shape = PulseShape("gaussian", 0.0, sigma, np.pi / 20)
    grid = TimeGrid.spanning(-70, 70, 0.5)
    env = render_pulse(shape, grid)
    expected = (np.pi / 20) / (sigma * np.sqrt(2 * np.pi))
    assert_allclose(np.max(np.abs(env.samples)), expected, rtol=1e-6)


def test_square_amplitude_and_area():
    w = 2.0
    shape = PulseShape("square", 1.0, w, np.pi)
    grid = TimeGrid.spanning(-5, 7, 0.013)
    env = render_pulse(shape, grid)
    interior = np.abs(env.samples[np.abs(grid.times - 1.0) < 0.8])
    assert_allclose(interior, np.pi / w, rtol=1e-12)
    assert_allclose(env.area.real, np.pi, rtol=1e-12)


@pytest.mark.parametrize("kind,width,area,chirp", [
    ("gaussian", 1.0, np.pi / 20, 0.0),
    ("gaussian", 0.1, np.pi, 0.0),
    ("square", 1.7, np.pi, 0.0),
    ("sech-chirped", 0.5, 2.0 * np.pi, 8.0),
])
def test_rendered_area_matches_request(kind, width, area, chirp):
    shape = PulseShape(kind, 0.0, width, area, chirp=chirp)
    grid = TimeGrid.spanning(-14, 14, width / 16)
    env = render_pulse(shape, grid)
    rendered = np.sum(np.abs(env.samples)) * grid.dt
    assert_allclose(rendered, area, rtol=1e-6)


def test_sech_chirp_sweep_is_monotone_tanh():
    shape = PulseShape("sech-chirped", 0.0, 0.5, 3.0 * np.pi, chirp=8.0)
    grid = TimeGrid.spanning(-11, 11, 0.002)
    env = render_pulse(shape, grid)
    sel = np.abs(grid.times) < 1.5
    phase = np.unwrap(np.angle(env.samples[sel]))
    freq = np.gradient(phase, grid.dt)
    assert np.all(np.diff(freq) > -1e-9), "sweep must be monotone"
    # sweep shape follows mu*beta*tanh(beta t)
    expected = shape.sweep_half_width * np.tanh(grid.times[sel] / shape.width)
    assert np.max(np.abs(freq - expected)) < 0.02 * shape.sweep_half_width


def test_clipped_pulse_raises():
    grid = TimeGrid.spanning(-3, 3, 0.05)
    with pytest.raises(GridTooShort):
        render_pulse(PulseShape("gaussian", 0.0, 1.0, np.pi), grid)
    with pytest.raises(GridTooShort):
        render_pulse(PulseShape("gaussian", 2.9, 0.3, np.pi), grid)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def test_delta_pulse_flat_spectrum():
    grid = TimeGrid(0.0, 0.1, 256)
    samples = np.zeros(256, complex)
    samples[40] = 1.0
    spec = forward_transform(ComplexEnvelope(grid, samples))
    assert_allclose(np.abs(spec), 0.1, rtol=1e-12)


def test_gaussian_fourier_pair():
    sigma = 2.0
    grid = TimeGrid.spanning(-30, 30, 0.05)
    env = render_pulse(PulseShape("gaussian", 0.0, sigma, 1.0), grid)
    spec = forward_transform(env)
    w = grid.omegas
    expected = np.exp(-0.5 * (w * sigma) ** 2)
    expected *= np.abs(spec).max() / expected.max()
    assert np.max(np.abs(np.abs(spec) - expected)) < 1e-8


def test_carrier_sign_convention_and_direct_sum():
    """exp(+i w0 t) must peak at +w0; spot-check against direct sums."""
    grid = TimeGrid.spanning(-20, 20, 0.04)
    w0 = 2.2
    body = np.exp(-0.5 * (grid.times / 4.0) ** 2) * np.exp(1j * w0 * grid.times)
    env = ComplexEnvelope(grid, body)
    spec = forward_transform(env)
    assert abs(grid.omegas[np.argmax(np.abs(spec))] - w0) < 2 * np.pi / grid.duration
    for w in (0.0, w0, -1.3):
        direct = np.sum(body * np.exp(-1j * w * grid.times)) * grid.dt
        k = np.argmin(np.abs(grid.omegas - w))
        via_fft = np.sum(body * np.exp(-1j * grid.omegas[k] * grid.times)) * grid.dt
        assert abs(spec[k] - via_fft) < 1e-10 * grid.n


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=6), st.floats(-3, 3),
       st.floats(0.3, 3.0))
def test_roundtrip_and_parseval(seed, t0, dt):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(t0, dt, 128)
    samples = rng.normal(size=128) + 1j * rng.normal(size=128)
    env = ComplexEnvelope(grid, samples)
    spec = forward_transform(env)
    back = inverse_transform(spec, grid)
    assert np.max(np.abs(back.samples - samples)) < 1e-12 * np.max(np.abs(samples))
    e_time = env.energy
    e_freq = np.sum(np.abs(spec) ** 2) * (2 * np.pi / grid.duration) / (2 * np.pi)
    assert abs(e_time - e_freq) < 1e-10 * e_time


# ---------------------------------------------------------------------------
# transfer functions
# ---------------------------------------------------------------------------

def _long_pulse_setup():
    grid = TimeGrid.spanning(-62, 75, 0.07)
    env = render_pulse(PulseShape("gaussian", 0.0, 10.0, np.pi / 20), grid)
    return grid, env


def test_transfer_identity_at_zero_depth():
    grid, env = _long_pulse_setup()
    out = apply_transfer(env, TransferFunction("inverted-lorentzian", d=0.0))
    assert np.max(np.abs(out.samples - env.samples)) < 1e-12


def test_transparency_group_delay():
    grid, env = _long_pulse_setup()
    out = apply_transfer(env, TransferFunction("inverted-lorentzian", d=20.0,
                                               gamma0=1.0))
    delay = out.centroid() - env.centroid()
    assert abs(delay - 10.0) < 0.5
    # weak attenuation only
    assert out.energy > 0.85 * env.energy


def test_transfer_composition():
    grid, env = _long_pulse_setup()
    for kind in ("inverted-lorentzian", "lorentzian"):
        tf1 = TransferFunction(kind, d=3.0)
        tf2 = TransferFunction(kind, d=5.0)
        tf12 = TransferFunction(kind, d=8.0)
        once = apply_transfer(env, tf12, tail_threshold=1.0)
        twice = apply_transfer(apply_transfer(env, tf1, tail_threshold=1.0),
                               tf2, tail_threshold=1.0)
        assert np.max(np.abs(once.samples - twice.samples)) \
            < 1e-10 * np.max(np.abs(once.samples))


def test_alias_guard_trips_on_wrapping_delay():
    # the delayed pulse runs off the short grid and wraps around
    grid = TimeGrid.spanning(-62, 66, 0.07)
    env = render_pulse(PulseShape("gaussian", 0.0, 10.0, np.pi / 20), grid)
    with pytest.raises(AliasRisk):
        apply_transfer(env, TransferFunction("inverted-lorentzian", d=40.0,
                                             gamma0=1.0))


def test_nyquist_guard():
    grid = TimeGrid(0.0, 0.5, 256)
    rng = np.random.default_rng(0)
    env = ComplexEnvelope(grid, rng.normal(size=256) + 0j)  # white spectrum
    with pytest.raises(AliasRisk):
        apply_transfer(env, TransferFunction("lorentzian", d=1.0))


def test_bessel_oracle_matches_scipy():
    x = np.linspace(0.0, 60.0, 4000)
    assert np.max(np.abs(oracles.j1_bessel(x) - scipy_j1(x))) < 1e-7


def test_absorption_window_matches_bessel_convolution():
    """Dual route: FFT filter versus direct convolution with the damped
    Bessel impulse response, on the retarded tail."""
    grid = TimeGrid.spanning(-0.31, 12.0, 0.05 / 12)
    env = render_pulse(PulseShape("gaussian", 0.0, 0.05, np.pi / 20), grid)
    out = apply_transfer(env, TransferFunction("lorentzian", d=20.0,
                                               gamma0=1.0))
    kern = oracles.absorption_window_kernel(grid.times - grid.t0, 20.0, 1.0)
    conv = oracles.convolve_with_kernel(env.samples, grid.dt, kern)
    tail = (grid.times > 0.05) & (grid.times < 2.0)
    num = np.sqrt(np.sum(np.abs(out.samples[tail] - conv[tail]) ** 2))
    den = np.sqrt(np.sum(np.abs(out.samples[tail]) ** 2))
    assert num / den < 0.01


def test_shaded_area_estimates():
    grid, env = _long_pulse_setup()
    out = apply_transfer(env, TransferFunction("inverted-lorentzian", d=20.0,
                                               gamma0=1.0))
    eff = shaded_area_efficiency(env, out, cut=5.0)
    assert abs(eff - 0.43) < 0.02

    grid2 = TimeGrid.spanning(-0.31, 12.0, 0.05 / 12)
    env2 = render_pulse(PulseShape("gaussian", 0.0, 0.05, np.pi / 20), grid2)
    out2 = apply_transfer(env2, TransferFunction("lorentzian", d=20.0,
                                                 gamma0=1.0))
    eff2 = shaded_area_efficiency(env2, out2, cut=0.05)
    assert abs(eff2 - 0.32) < 0.02

    assert shaded_area_efficiency(env, env, cut=5.0) == 0.0


# ---------------------------------------------------------------------------
# detuning distributions
# ---------------------------------------------------------------------------

def test_hole_distribution_bounded():
    dist = DetuningDistribution("lorentzian-hole", gamma0=1.0,
                                span=(-24, 24), nclasses=401)
    g = dist.g(dist.nodes())
    assert np.all(g >= 0.0) and np.all(g <= 1.0)
    assert g[np.argmin(np.abs(dist.nodes()))] < 1e-12


def test_quadrature_converges_on_doubling():
    dist = DetuningDistribution("lorentzian-hole", gamma0=1.0,
                                span=(-24, 24), nclasses=801)
    coarse = dist.quadrature_of_g()
    fine = dist.refine().quadrature_of_g()
    assert abs(fine - coarse) / abs(fine) < 1e-4


def test_resonant_class_weight():
    dist = DetuningDistribution("delta-resonant", gamma0=4.0)
    assert_allclose(dist.weights(), [np.pi * 4.0])
    assert_allclose(dist.nodes(), [0.0])
