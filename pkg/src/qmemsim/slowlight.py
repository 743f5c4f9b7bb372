"""End-to-end stopped-light protocol runners.

Four protocols share one storage principle: a retarded medium response is
converted to storage by shelving the optical excitation into the spin
state, either with brief resonant Raman pi-pulses (spectral-hole memory,
free-induction-decay memory) or by switching a control field off and on
(EIT and Raman memories).  Efficiencies are read as the retrieved energy
after the retrieval event over the input energy.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .numcore import (ComplexEnvelope, DetuningDistribution, PulseShape,
                      TimeGrid, render_pulse)
from .threelevel import (ControlPulse, ControlSchedule, ControlSegment,
                         LambdaResult, RamanConditionViolated, eit_linewidth,
                         light_shift, propagate_lambda, raman_linewidth)
from .twolevel import ConvergenceNotMet, PropagationConfig

PROTOCOLS = ("shome", "fid", "eit", "raman")


@dataclass(frozen=True)
class SlowLightScenario:
    """One stopped-light storage scenario.

    Attributes:
        protocol: "shome", "fid", "eit" or "raman".
        d: optical depth of the background line.
        gamma0: spectral-hole width (shome only).
        gamma: optical linewidth (fid/eit/raman).
        rabi: control Rabi frequency (eit/raman) or the Raman pi-pulse area
            is fixed to pi (shome/fid).
        detuning: one-photon control detuning (raman).
        signal: input pulse shape.
        storage_event: pi-pulse time or control switch-off time.
        retrieval_event: second pi-pulse time or control switch-on time.
        pi_width: Raman pi-pulse duration (shome/fid).
    """

    protocol: str
    d: float
    signal: PulseShape
    storage_event: float
    retrieval_event: float
    gamma0: float = 1.0
    gamma: float = 0.0
    rabi: float = 0.0
    detuning: float = 0.0
    pi_width: float = 0.0
    control_ramp: float = 0.0

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if not (self.signal.center < self.storage_event < self.retrieval_event):
            raise ValueError(
                "need signal center < storage_event < retrieval_event")
        if self.protocol == "raman" and self.detuning < 10.0 * self.gamma:
            warnings.warn("Raman memory outside the far-detuned regime",
                          RamanConditionViolated)

    # -- canonical parameter sets ------------------------------------------

    @classmethod
    def shome(cls, d: float = 20.0, gamma0: float = 1.0,
              storage_event: Optional[float] = None,
              retrieval_event: Optional[float] = None) -> "SlowLightScenario":
        """Spectral-hole memory: slow light in a transparency hole, stored
        by Raman pi-pulses at half the group delay."""
        sigma = d / (2.0 * gamma0)
        store = storage_event if storage_event is not None else d / (4.0 * gamma0)
        retrieve = retrieval_event if retrieval_event is not None else 6.0 * store
        return cls(protocol="shome", d=d, gamma0=gamma0,
                   signal=PulseShape("gaussian", 0.0, sigma, np.pi / 20),
                   storage_event=store, retrieval_event=retrieve,
                   pi_width=sigma / 10.0)

    @classmethod
    def fid(cls, d: float = 20.0, gamma: float = 1.0,
            storage_event: Optional[float] = None,
            retrieval_event: Optional[float] = None) -> "SlowLightScenario":
        """Free-induction-decay memory: the retarded response of a plain
        absorption line, stored by Raman pi-pulses."""
        sigma = 1.0 / (d * gamma)
        store = storage_event if storage_event is not None else sigma
        retrieve = retrieval_event if retrieval_event is not None else 16.0 * sigma
        return cls(protocol="fid", d=d, gamma=gamma,
                   signal=PulseShape("gaussian", 0.0, sigma, np.pi / 20),
                   storage_event=store, retrieval_event=retrieve,
                   pi_width=sigma / 10.0)

    @classmethod
    def eit(cls, d: float = 20.0, gamma: float = 4.0, rabi: float = 4.0,
            storage_event: Optional[float] = None,
            retrieval_event: Optional[float] = None) -> "SlowLightScenario":
        """EIT memory: transparency window of width rabi^2/(4 gamma) closed
        and reopened by the control field."""
        g_eit = eit_linewidth(rabi, gamma)
        sigma = d / (2.0 * g_eit)
        store = storage_event if storage_event is not None else d / (4.0 * g_eit)
        retrieve = retrieval_event if retrieval_event is not None else 6.0 * store
        return cls(protocol="eit", d=d, gamma=gamma, rabi=rabi,
                   signal=PulseShape("gaussian", 0.0, sigma, np.pi / 20),
                   storage_event=store, retrieval_event=retrieve)

    @classmethod
    def raman(cls, d: float = 20.0, gamma: float = 10.0,
              rabi: float = 200.0 * np.sqrt(10.0), detuning: float = 1000.0,
              storage_event: Optional[float] = None,
              retrieval_event: Optional[float] = None) -> "SlowLightScenario":
        """Raman memory: far-detuned control opens an absorption peak of
        width rabi^2 gamma / (4 detuning^2); the signal sits on the
        light-shifted two-photon resonance."""
        g_r = raman_linewidth(rabi, gamma, detuning)
        sigma = 1.0 / (d * g_r)
        store = storage_event if storage_event is not None else sigma
        retrieve = retrieval_event if retrieval_event is not None else 16.0 * sigma
        # switch over ~15 inverse one-photon detunings: adiabatic for the
        # control dressing, still sudden against the light-shift period
        return cls(protocol="raman", d=d, gamma=gamma, rabi=rabi,
                   detuning=detuning,
                   signal=PulseShape("gaussian", 0.0, sigma, np.pi / 20),
                   storage_event=store, retrieval_event=retrieve,
                   control_ramp=15.0 / detuning)

    # -- derived quantities -------------------------------------------------

    @property
    def structure_width(self) -> float:
        """Width of the dispersive feature the signal propagates in."""
        if self.protocol == "shome":
            return self.gamma0
        if self.protocol == "fid":
            return self.gamma
        if self.protocol == "eit":
            return eit_linewidth(self.rabi, self.gamma)
        return raman_linewidth(self.rabi, self.gamma, self.detuning)

    @property
    def two_photon(self) -> float:
        return light_shift(self.rabi, self.detuning) \
            if self.protocol == "raman" else 0.0

    def efficiency_window(self) -> tuple:
        return (self.retrieval_event,
                self.retrieval_event + 8.0 * self.signal.width)

    def replica_window(self) -> tuple:
        """Interval between the events where a leaked slow-light replica
        would show up."""
        return (self.storage_event + 0.5 * self.signal.width,
                self.retrieval_event - 0.5 * self.signal.width)


def _grid_for(s: SlowLightScenario, grid_scale: float) -> TimeGrid:
    sig = s.signal
    t_min = sig.center - sig.support_half_width() - 2.0 * sig.width
    t_max = s.efficiency_window()[1] + 2.0 * sig.width
    if s.protocol in ("shome", "fid"):
        dt = s.pi_width / 10.0
    elif s.protocol == "raman":
        # resolve the light-shift beat as well as the pulse
        dt = min(sig.width / 10.0, 2.0 * np.pi / (12.0 * s.two_photon))
    else:
        dt = min(sig.width / 10.0, 1.0 / (8.0 * s.gamma))
    return TimeGrid.spanning(t_min, t_max, dt / grid_scale)


def _distribution_for(s: SlowLightScenario, grid: TimeGrid,
                      grid_scale: float) -> DetuningDistribution:
    if s.protocol == "shome":
        half = 24.0 * s.gamma0
        # keep the discrete-comb revival of the excited classes beyond the
        # simulated window
        d_delta = 2.0 * np.pi / (1.5 * grid.duration) / grid_scale
        nclasses = int(np.ceil(2.0 * half / d_delta)) + 1
        if nclasses % 2 == 0:
            nclasses += 1
        return DetuningDistribution("lorentzian-hole", gamma0=s.gamma0,
                                    span=(-half, half), nclasses=nclasses)
    return DetuningDistribution("delta-resonant", gamma0=s.gamma)


def _schedule_for(s: SlowLightScenario, grid: TimeGrid,
                  with_events: bool) -> ControlSchedule:
    t_lo = grid.times[0] - 1.0
    t_hi = grid.times[-1] + 1.0
    if s.protocol in ("shome", "fid"):
        if not with_events:
            return ControlSchedule(segments=())
        pulse = PulseShape("gaussian", 0.0, s.pi_width, np.pi)
        return ControlSchedule(segments=(
            ControlPulse(s.storage_event, pulse),
            ControlPulse(s.retrieval_event, pulse)))
    delta_one = s.detuning if s.protocol == "raman" else 0.0
    if not with_events:
        segs = (ControlSegment((t_lo, t_hi), s.rabi, s.control_ramp),)
    else:
        segs = (ControlSegment((t_lo, s.storage_event), s.rabi, s.control_ramp),
                ControlSegment((s.retrieval_event, t_hi), s.rabi,
                               s.control_ramp))
    return ControlSchedule(segments=segs, delta=s.two_photon,
                           delta_one=delta_one)


def _config_for(s: SlowLightScenario, nz: int) -> PropagationConfig:
    gamma = 0.0 if s.protocol == "shome" else s.gamma
    osc_cap = np.inf
    if s.protocol == "shome":
        # classes far outside the hole only add out-of-band junk; cap the
        # substep-control oscillation scale at the hole structure
        osc_cap = max(3.0 * s.gamma0, 20.0 / s.signal.width)
    return PropagationConfig(d=s.d, nz=nz, gamma=gamma, accuracy=2e-6,
                             osc_cap=osc_cap)


@dataclass
class SlowLightReport:
    """Efficiency plus the traces needed to plot a storage figure."""

    scenario: SlowLightScenario
    efficiency: float
    window: tuple
    input: ComplexEnvelope
    output: ComplexEnvelope
    reference: ComplexEnvelope
    control: np.ndarray
    replica_energy_fraction: float
    leak_energy_fraction: float
    result: LambdaResult
    reference_result: LambdaResult
    convergence: Optional[dict] = None

    @property
    def times(self) -> np.ndarray:
        return self.input.grid.times


def reference_slowlight(s: SlowLightScenario, nz: int = 64,
                        grid_scale: float = 1.0,
                        signal_envelope: Optional[ComplexEnvelope] = None
                        ) -> LambdaResult:
    """Slow-light run of the scenario with the storage events removed."""
    grid = _grid_for(s, grid_scale)
    dist = _distribution_for(s, grid, grid_scale)
    env = signal_envelope if signal_envelope is not None \
        else render_pulse(s.signal, grid)
    cfg = _config_for(s, nz)
    return propagate_lambda(env, cfg, dist, _schedule_for(s, grid, False))


def run_slowlight(s: SlowLightScenario, nz: int = 64, grid_scale: float = 1.0,
                  convergence: bool = False,
                  signal_envelope: Optional[ComplexEnvelope] = None
                  ) -> SlowLightReport:
    """Run a full storage/retrieval sequence plus its no-storage reference.

    The efficiency is the output energy integrated from the retrieval
    event over eight signal widths, as a fraction of the input energy.
    """
    grid = _grid_for(s, grid_scale)
    dist = _distribution_for(s, grid, grid_scale)
    env = signal_envelope if signal_envelope is not None \
        else render_pulse(s.signal, grid)
    window = s.efficiency_window()

    def run_once(nz_run):
        cfg = _config_for(s, nz_run)
        res = propagate_lambda(env, cfg, dist, _schedule_for(s, grid, True))
        t = grid.times
        sel = (t >= window[0]) & (t <= window[1])
        return res, float(np.sum(np.abs(res.output.samples[sel]) ** 2)
                          * grid.dt) / env.energy

    res, eff = run_once(nz)
    conv = None
    if convergence:
        _, eff_fine = run_once(2 * nz)
        rel = abs(eff_fine - eff) / max(eff_fine, 1e-300)
        conv = {"efficiency": eff, "efficiency_fine": eff_fine,
                "relative_change": rel, "tolerance": 0.01}
        if rel > 0.01:
            raise ConvergenceNotMet(
                f"slow-light efficiency moved {rel:.2%} on nz doubling")

    ref = reference_slowlight(s, nz=nz, grid_scale=grid_scale,
                              signal_envelope=signal_envelope)
    t = grid.times
    rw = s.replica_window()
    sel_rep = (t >= rw[0]) & (t <= rw[1])
    replica = float(np.sum(np.abs(res.output.samples[sel_rep]) ** 2)
                    * grid.dt) / env.energy
    sel_leak = t < s.storage_event
    leak = float(np.sum(np.abs(res.output.samples[sel_leak]) ** 2)
                 * grid.dt) / env.energy

    return SlowLightReport(
        scenario=s, efficiency=eff, window=window, input=env,
        output=res.output, reference=ref.output, control=res.control,
        replica_energy_fraction=replica, leak_energy_fraction=leak,
        result=res, reference_result=ref, convergence=conv)


def rising_exponential(grid: TimeGrid, cutoff: float, time_constant: float,
                       area: float = np.pi / 20) -> ComplexEnvelope:
    """Rising-exponential input truncated at ``cutoff`` (the optimal FID
    input, time-reversed image of the decaying retrieval)."""
    t = grid.times
    env = np.where(t <= cutoff, np.exp((t - cutoff) / time_constant), 0.0)
    env = env / (np.sum(env) * grid.dt) * area
    return ComplexEnvelope(grid, env.astype(np.complex128))
