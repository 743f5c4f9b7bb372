"""Two-level class evolution and Maxwell marching."""

import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qmemsim.numcore import (ComplexEnvelope, DetuningDistribution,
                             PulseShape, TimeGrid, TransferFunction,
                             apply_transfer, render_pulse)
from qmemsim.twolevel import (ConvergenceNotMet, PropagationConfig,
                              StepTooCoarse, evolve_class, propagate,
                              pulse_area_profile)
from qmemsim.echoprotocols import flat_distribution
import oracles


def _empty(grid):
    return ComplexEnvelope(grid, np.zeros(grid.n, np.complex128))


# ---------------------------------------------------------------------------
# single-class dynamics
# ---------------------------------------------------------------------------

def test_free_evolution_phase():
    grid = TimeGrid.spanning(-4, 4, 0.01)
    traj = evolve_class((0.0, 1.0), _empty(grid), delta=3.1)
    expected = np.exp(1j * 3.1 * (grid.times - grid.times[0]))
    assert np.max(np.abs(traj.ce - expected)) < 1e-12
    assert np.max(np.abs(traj.cg)) == 0.0


def test_resonant_pi_square_pulse_inverts():
    grid = TimeGrid.spanning(-4, 4, 0.005)
    env = render_pulse(PulseShape("square", 0.0, 2.0, np.pi), grid)
    traj = evolve_class((1.0, 0.0), env, delta=0.0)
    assert abs(traj.cg[-1]) < 1e-9
    assert abs(traj.ce[-1] - (-1j)) < 1e-9  # global phase fixed by the drive


def test_weak_pulse_maps_spectrum_to_coherence():
    """After absorption the class coherence equals -(i/2) E~(delta) up to
    the free phase, checked against direct quadrature."""
    grid = TimeGrid.spanning(-8, 8, 0.01)
    env = render_pulse(PulseShape("gaussian", 0.0, 1.0, np.pi / 40), grid)
    # resonant class: P(inf) = -(i/2) * area
    traj = evolve_class((1.0, 0.0), env, delta=0.0)
    assert abs(traj.coherence[-1] - (-0.5j) * env.area) < 1e-4
    # detuned class against the quadrature oracle (free phase removed)
    delta = 1.7
    traj2 = evolve_class((1.0, 0.0), env, delta=delta)
    expected = oracles.coherence_by_quadrature(env.samples, grid.times, delta)
    got = traj2.coherence[-1] * np.exp(-1j * delta * grid.times[-1])
    assert abs(got - expected) < 1e-4


def test_norm_is_machine_conserved():
    grid = TimeGrid.spanning(-4, 12, 0.01)
    env = render_pulse(PulseShape("gaussian", 0.0, 0.3, np.pi), grid)
    traj = evolve_class((1.0, 0.0), env, delta=6.0)
    assert np.max(np.abs(traj.norm - 1.0)) < 1e-10


def test_step_gate_raises_when_saturated():
    grid = TimeGrid.spanning(-6, 6, 0.2)  # absurdly coarse for this drive
    env = render_pulse(PulseShape("gaussian", 0.0, 0.8, 6 * np.pi), grid)
    with pytest.raises(StepTooCoarse):
        evolve_class((1.0, 0.0), env, delta=15.0, nt_substeps=1,
                     accuracy=1e300, rabi_step=1e300)


# ---------------------------------------------------------------------------
# propagation laws
# ---------------------------------------------------------------------------

def _weak_run(d, inversion="ground", nz=48):
    grid = TimeGrid.spanning(-6.5, 9.0, 0.02)
    env = render_pulse(PulseShape("gaussian", 0.0, 1.0, np.pi / 20), grid)
    dist = flat_distribution(1.0, grid.duration)
    cfg = PropagationConfig(d=d, nz=nz, inversion=inversion)
    res = propagate(env, cfg, dist)
    # transmitted energy in the signal window only (the periodic comb of
    # the discrete distribution lives far outside)
    sel = np.abs(grid.times) < 6.0
    e_out = np.sum(np.abs(res.output.samples[sel]) ** 2) * grid.dt
    return res, e_out / env.energy


def test_beer_lambert_absorption():
    _, transmission = _weak_run(2.0)
    assert abs(transmission - np.exp(-2.0)) < 0.01 * np.exp(-2.0)


def test_inverted_medium_gain():
    _, transmission = _weak_run(2.0, inversion="inverted")
    assert abs(transmission - np.exp(2.0)) < 0.02 * np.exp(2.0)


def test_zero_depth_identity():
    res, transmission = _weak_run(0.0)
    assert np.max(np.abs(res.output.samples - res.input.samples)) == 0.0


def test_linearity_in_the_weak_signal():
    grid = TimeGrid.spanning(-6.5, 9.0, 0.02)
    dist = flat_distribution(1.0, grid.duration)
    cfg = PropagationConfig(d=1.5, nz=24)
    base = render_pulse(PulseShape("gaussian", 0.0, 1.0, 1e-3), grid)
    out1 = propagate(base, cfg, dist).output.samples
    for lam in (0.5, 2.0):
        env = ComplexEnvelope(grid, lam * base.samples)
        out = propagate(env, cfg, dist).output.samples
        scale = np.max(np.abs(out1))
        assert np.max(np.abs(out - lam * out1)) < 1e-6 * lam * scale


def test_homogeneous_line_matches_lorentzian_filter():
    """Resonant class with decay == frequency-domain absorption window."""
    grid = TimeGrid.spanning(-0.35, 6.0, 0.0025)
    env = render_pulse(PulseShape("gaussian", 0.0, 0.05, np.pi / 40), grid)
    dist = DetuningDistribution("delta-resonant", gamma0=1.0)
    cfg = PropagationConfig(d=3.0, nz=48, gamma=1.0)
    res = propagate(env, cfg, dist)
    ref = apply_transfer(env, TransferFunction("lorentzian", d=3.0,
                                               gamma0=1.0))
    assert abs(res.output.energy - ref.energy) < 0.01 * ref.energy


def test_grid_independence_of_the_echo():
    """Doubling nz, substeps, or the class count moves a CRIB echo by
    less than 1%."""
    from qmemsim.echoprotocols import run_crib
    signal = PulseShape("gaussian", 0.0, 1.0, np.pi / 20)
    base_cfg = PropagationConfig(d=2.0, nz=24)
    base = run_crib(base_cfg, signal, tau=6.0).numeric
    finer_z = run_crib(dataclasses.replace(base_cfg, nz=48), signal,
                       tau=6.0).numeric
    finer_t = run_crib(dataclasses.replace(base_cfg, substep_scale=2.0),
                       signal, tau=6.0).numeric
    denser = run_crib(base_cfg, signal, tau=6.0, grid_scale=1.0,
                      dist=flat_distribution(1.0, 32.0,
                                             density_scale=2.0)).numeric
    for other in (finer_z, finer_t, denser):
        assert abs(other - base) / base < 0.01


def test_convergence_gate_raises():
    grid = TimeGrid.spanning(-0.35, 3.0, 0.0025)
    env = render_pulse(PulseShape("gaussian", 0.0, 0.05, np.pi / 40), grid)
    dist = DetuningDistribution("delta-resonant", gamma0=1.0)
    cfg = PropagationConfig(d=20.0, nz=20, gamma=1.0, z_scheme="euler",
                            convergence_check=True)
    with pytest.raises(ConvergenceNotMet):
        propagate(env, cfg, dist)


def test_homogeneous_weight_mismatch_rejected():
    grid = TimeGrid.spanning(-0.35, 3.0, 0.005)
    env = render_pulse(PulseShape("gaussian", 0.0, 0.05, np.pi / 40), grid)
    dist = DetuningDistribution("delta-resonant", gamma0=1.0)
    with pytest.raises(ValueError):
        propagate(env, PropagationConfig(d=1.0, nz=24, gamma=2.0), dist)


# ---------------------------------------------------------------------------
# pulse areas through the medium
# ---------------------------------------------------------------------------

def test_small_area_follows_exponential_decay():
    grid = TimeGrid.spanning(-6.5, 9.0, 0.02)
    env = render_pulse(PulseShape("gaussian", 0.0, 1.0, 0.01), grid)
    dist = flat_distribution(1.0, grid.duration)
    cfg = PropagationConfig(d=2.0, nz=48, store_slices=True)
    res = propagate(env, cfg, dist)
    z, theta = pulse_area_profile(res)
    assert abs(theta[-1] - 0.01 * np.exp(-1.0)) < 0.02 * 0.01 * np.exp(-1.0)


def test_pi_square_area_is_preserved_but_energy_decays():
    grid = TimeGrid.spanning(-8, 10, 0.01)
    env = render_pulse(PulseShape("square", 0.0, 2.0, np.pi), grid)
    dist = flat_distribution(2.0, grid.duration)
    cfg = PropagationConfig(d=1.0, nz=32, store_slices=True)
    res = propagate(env, cfg, dist)
    z, theta = pulse_area_profile(res)
    assert abs(theta[-1] - np.pi) < 0.05 * np.pi
    energies = np.sum(np.abs(res.slice_envelopes) ** 2, axis=1) * grid.dt
    assert np.all(np.diff(energies) < 1e-12)
    assert energies[-1] < 0.9 * energies[0]
