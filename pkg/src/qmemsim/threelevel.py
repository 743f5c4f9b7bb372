"""Perturbative Lambda-system solver and closed-form susceptibilities.

The weak signal drives the optical coherence P while a control field
couples P to the spin coherence S:

    dP/dt = (i Delta - Gamma) P - i (Omega/2) S - i (E/2)
    dS/dt = -i (Omega*/2) P + i delta_2 S

The control envelope is unaffected by propagation (empty spin state), so
one control programme drives every slice.  Spin decay is neglected.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .numcore import ComplexEnvelope, DetuningDistribution, TimeGrid, render_pulse
from .twolevel import (ConvergenceNotMet, PropagationConfig, StepTooCoarse,
                       STEP_TOL)


class RamanConditionViolated(UserWarning):
    """Control detuning is not far off resonance (Delta < 10 Gamma)."""


# ---------------------------------------------------------------------------
# Control schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlSegment:
    """Constant control amplitude over [t0, t1], with linear switching
    ramps of duration ``ramp`` starting at t0 and at t1.

    A zero ramp switches within one field sample.  A small but finite ramp
    keeps far-detuned switching adiabatic with respect to the control
    dressing while remaining sudden for the storage dynamics.
    """
    interval: tuple
    amplitude: float
    ramp: float = 0.0


@dataclass(frozen=True)
class ControlPulse:
    """Shaped control pulse (e.g. a brief Raman pi-pulse) centered at time."""
    time: float
    shape: object  # PulseShape


@dataclass(frozen=True)
class ControlSchedule:
    """Control-field programme plus the static detunings.

    Attributes:
        segments: ControlSegment / ControlPulse entries, summed on the grid.
        delta: two-photon detuning (spin-state rotating-frame offset).
        delta_one: one-photon detuning added to every class detuning.
    """

    segments: tuple = ()
    delta: float = 0.0
    delta_one: float = 0.0

    def render(self, grid: TimeGrid) -> np.ndarray:
        om = np.zeros(grid.n, np.complex128)
        t = grid.times
        for seg in self.segments:
            if isinstance(seg, ControlSegment):
                t0, t1 = seg.interval
                if seg.ramp > 0:
                    up = np.clip((t - t0) / seg.ramp, 0.0, 1.0)
                    down = np.clip(1.0 - (t - t1) / seg.ramp, 0.0, 1.0)
                    om += seg.amplitude * np.minimum(up, down)
                else:
                    om[(t >= t0) & (t < t1)] += seg.amplitude
            elif isinstance(seg, ControlPulse):
                shape = replace(seg.shape, center=seg.time)
                om += render_pulse(shape, grid).samples
            else:
                raise TypeError(f"unknown control entry {seg!r}")
        return om


# ---------------------------------------------------------------------------
# Susceptibilities
# ---------------------------------------------------------------------------

def eit_linewidth(rabi: float, gamma: float) -> float:
    """Width of the transparency window opened by a resonant control."""
    return rabi ** 2 / (4.0 * gamma)


def raman_linewidth(rabi: float, gamma: float, detuning: float) -> float:
    """Width of the off-resonant Raman absorption peak."""
    return rabi ** 2 * gamma / (4.0 * detuning ** 2)


def light_shift(rabi: float, detuning: float) -> float:
    """AC-Stark displacement of the Raman peak."""
    return rabi ** 2 / (4.0 * detuning)


def susceptibility(kind: str, omega, *, gamma: float, rabi: float,
                   detuning: float = 0.0, two_photon: float = 0.0):
    """Exact dimensionless dispersion profile chi(w).

    The propagation constant is ``alpha~(w) = -(alpha/2) chi(w)``; far from
    any structure chi -> 1 recovers plain exponential absorption.

    Kinds: "eit" (resonant control, transparency at w = 0) and "raman"
    (far-detuned control, absorption peak of width raman_linewidth).

    Warns:
        RamanConditionViolated: for "raman" with detuning < 10 gamma.
    """
    if gamma <= 0 or rabi <= 0:
        raise ValueError("gamma and rabi must be positive")
    w = np.asarray(omega, dtype=np.complex128)
    if kind == "eit":
        with np.errstate(divide="ignore", invalid="ignore"):
            out = gamma / (1j * w + gamma - 1j * rabi ** 2 / (4.0 * w))
        return np.where(w == 0, 0.0, out)
    if kind == "raman":
        if detuning < 10.0 * gamma:
            warnings.warn("control detuning below 10x the optical linewidth; "
                          "the Raman expansion is unreliable",
                          RamanConditionViolated)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = gamma / (1j * (w - detuning) + gamma
                           - 1j * rabi ** 2 / (4.0 * (w - two_photon)))
        return np.where(w == two_photon, 0.0, out)
    raise ValueError(f"unknown susceptibility kind {kind!r}")


# ---------------------------------------------------------------------------
# Single-class evolution
# ---------------------------------------------------------------------------

@dataclass
class LambdaState:
    """Optical (P) and spin (S) coherences per (z-slice, detuning class)."""

    P: np.ndarray
    S: np.ndarray


@dataclass
class LambdaTrajectory:
    times: np.ndarray
    P: np.ndarray
    S: np.ndarray


def evolve_lambda(state, env: ComplexEnvelope, schedule: ControlSchedule,
                  gamma: float, delta: float = 0.0, nt_substeps: int = 4,
                  check_step: bool = True, accuracy: float = 1e-9,
                  rabi_step: float = 0.35) -> LambdaTrajectory:
    """Evolve one (P, S) class under a given field and control programme.

    ``delta`` is the class detuning on top of ``schedule.delta_one``.
    """
    p0, s0 = complex(state[0]), complex(state[1])
    grid = env.grid
    om = schedule.render(grid)
    dtot = delta + schedule.delta_one
    osc4 = (abs(dtot) + abs(schedule.delta)) ** 4

    def run(scale):
        pp = np.array([p0], np.complex128)
        ss = np.array([s0], np.complex128)
        fP, gP, fS, gS = _kernels.lambda_tables(
            np.array([dtot]), gamma, schedule.delta, grid.dt)
        nt = grid.n
        out_pw = np.empty(nt, np.complex128)
        out_exc = np.empty(nt, np.float64)
        out_dec = np.empty(nt, np.float64)
        traj_p = np.empty((nt, 1), np.complex128)
        traj_s = np.empty((nt, 1), np.complex128)
        base_level = max(0, int(np.ceil(np.log2(nt_substeps * scale))))
        _kernels.lambda_window(
            pp, ss, env.samples, om, np.ones(1), grid.dt, fP, gP, fS, gS,
            base_level, _kernels.LMAX, rabi_step, accuracy, osc4, scale,
            out_pw, out_exc, out_dec, gamma, True, traj_p, traj_s)
        return traj_p[:, 0], traj_s[:, 0]

    p_t, s_t = run(1.0)
    if check_step:
        p_f, s_f = run(2.0)
        err = max(np.max(np.abs(p_t - p_f)), np.max(np.abs(s_t - s_f)))
        if err > STEP_TOL:
            raise StepTooCoarse(
                f"per-sample error estimate {err:.2e} exceeds {STEP_TOL:g}")
        p_t, s_t = p_f, s_f
    return LambdaTrajectory(grid.times, p_t, s_t)


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

@dataclass
class LambdaResult:
    """Propagation output with coherent energy bookkeeping.

    stored_excitation and decayed are in field-energy units, so at every
    sample:  input_energy_to_date ~= transmitted_to_date + stored + decayed.
    """

    input: ComplexEnvelope
    control: np.ndarray
    output: ComplexEnvelope
    cfg: PropagationConfig
    dist: DetuningDistribution
    schedule: ControlSchedule
    state: LambdaState
    nodes: np.ndarray
    stored_excitation: np.ndarray
    decayed: np.ndarray
    substeps_total: int = 0
    max_level: int = 0
    convergence: Optional[dict] = None

    def energy_balance(self) -> dict:
        """Cumulative input/transmitted/stored/decayed energies vs time."""
        dt = self.input.grid.dt
        e_in = np.cumsum(np.abs(self.input.samples) ** 2) * dt
        e_out = np.cumsum(np.abs(self.output.samples) ** 2) * dt
        return {"input": e_in, "transmitted": e_out,
                "stored": self.stored_excitation, "decayed": self.decayed,
                "residual": e_in - e_out - self.stored_excitation
                            - self.decayed}


def propagate_lambda(inp: ComplexEnvelope, cfg: PropagationConfig,
                     dist: DetuningDistribution,
                     schedule: ControlSchedule) -> LambdaResult:
    """March the weak signal through the Lambda medium.

    Homogeneous media use a single resonant class whose weight reduces the
    polarization source to the homogeneous form (-i alpha Gamma P).
    """
    grid = inp.grid
    nt = grid.n
    nodes = dist.nodes()
    wgt = dist.weights()
    nc = nodes.size
    if dist.kind == "delta-resonant" and not np.isclose(dist.gamma0, cfg.gamma):
        raise ValueError(
            "homogeneous runs need dist.gamma0 == cfg.gamma (the source "
            "weight and the coherence decay describe the same line)")
    om = schedule.render(grid)
    deltas = nodes + schedule.delta_one
    osc4 = min(float(np.max(np.abs(deltas))) + abs(schedule.delta),
               cfg.osc_cap) ** 4

    # the solver is linear in the signal: normalize to unit peak so the
    # substep error targets are relative, then scale everything back
    peak = float(np.max(np.abs(inp.samples)))
    amp_scale = peak if peak > 0 else 1.0

    dz = 1.0 / cfg.nz
    alpha = cfg.d
    base_level = max(0, int(np.ceil(np.log2(cfg.nt_substeps))))
    fP, gP, fS, gS = _kernels.lambda_tables(deltas, cfg.gamma, schedule.delta,
                                            grid.dt)
    scale = cfg.substep_scale
    kern = _kernels.lambda_window
    dummy = np.empty((1, 1), np.complex128)

    P = np.zeros((cfg.nz, nc), np.complex128)
    S = np.zeros((cfg.nz, nc), np.complex128)
    E = inp.samples.astype(np.complex128) / amp_scale
    pw = np.empty(nt, np.complex128)
    exc = np.empty(nt, np.float64)
    dec = np.empty(nt, np.float64)
    stored = np.zeros(nt, np.float64)
    decayed = np.zeros(nt, np.float64)
    src_coef = -1j * alpha / np.pi
    energy_coef = 2.0 * alpha / np.pi * dz
    nsub_total = 0
    max_level = 0

    for j in range(cfg.nz):
        if cfg.z_scheme == "midpoint":
            p_pred = P[j].copy()
            s_pred = S[j].copy()
            n1, l1 = kern(p_pred, s_pred, E, om, wgt, grid.dt, fP, gP, fS, gS,
                          base_level, cfg.max_substep_level, cfg.rabi_step,
                          cfg.accuracy, osc4, scale, pw, exc, dec, cfg.gamma,
                          False, dummy, dummy)
            E_mid = E + (0.5 * dz) * (src_coef * pw)
            n2, l2 = kern(P[j], S[j], E_mid, om, wgt, grid.dt, fP, gP, fS, gS,
                          base_level, cfg.max_substep_level, cfg.rabi_step,
                          cfg.accuracy, osc4, scale, pw, exc, dec, cfg.gamma,
                          False, dummy, dummy)
            E = E + dz * (src_coef * pw)
            nsub_total += n1 + n2
            max_level = max(max_level, l1, l2)
        else:
            n1, l1 = kern(P[j], S[j], E, om, wgt, grid.dt, fP, gP, fS, gS,
                          base_level, cfg.max_substep_level, cfg.rabi_step,
                          cfg.accuracy, osc4, scale, pw, exc, dec, cfg.gamma,
                          False, dummy, dummy)
            E = E + dz * (src_coef * pw)
            nsub_total += n1
            max_level = max(max_level, l1)
        stored += energy_coef * exc
        decayed += energy_coef * dec

    P *= amp_scale
    S *= amp_scale
    result = LambdaResult(
        input=inp, control=om,
        output=ComplexEnvelope(grid, E * amp_scale), cfg=cfg,
        dist=dist, schedule=schedule, state=LambdaState(P, S), nodes=nodes,
        stored_excitation=stored * amp_scale ** 2,
        decayed=decayed * amp_scale ** 2,
        substeps_total=nsub_total, max_level=max_level)

    if cfg.convergence_check:
        fine_cfg = dataclasses.replace(cfg, nz=2 * cfg.nz,
                                       convergence_check=False)
        fine = propagate_lambda(inp, fine_cfg, dist, schedule)
        e0, e1 = result.output.energy, fine.output.energy
        rel = abs(e1 - e0) / max(e1, 1e-300)
        result.convergence = {"nz": cfg.nz, "nz_fine": fine_cfg.nz,
                              "energy": e0, "energy_fine": e1,
                              "relative_change": rel,
                              "tolerance": cfg.convergence_tol}
        if rel > cfg.convergence_tol:
            raise ConvergenceNotMet(
                f"output energy moved {rel:.2%} on nz doubling "
                f"(gate {cfg.convergence_tol:.2%})")
    return result
