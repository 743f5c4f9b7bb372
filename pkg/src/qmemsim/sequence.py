"""Timed protocol events shared by the solvers and the protocol runners."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from .numcore import PulseShape


@dataclass(frozen=True)
class SignalEvent:
    """Weak signal pulse arriving at ``time`` (the rendered pulse center)."""
    time: float
    shape: PulseShape


@dataclass(frozen=True)
class StrongPulseEvent:
    """Strong (rephasing/control) pulse co-propagated on the field grid."""
    time: float
    shape: PulseShape


@dataclass(frozen=True)
class DetuningFlipEvent:
    """Instantaneous sign reversal of every class detuning."""
    time: float


@dataclass(frozen=True)
class MediumFlipEvent:
    """Fictitious spatial reversal of the medium (backward retrieval)."""
    time: float


@dataclass(frozen=True)
class ProtocolSequence:
    """Ordered protocol events plus the echo extraction window.

    Attributes:
        events: tuple of events with strictly increasing times.
        window: (t_lo, t_hi) interval the echo is integrated over.
        silent_windows: intervals where the radiated macroscopic source is
            suppressed (1D surrogate for a phase-mismatched emission; the
            coherences keep evolving freely).
    """

    events: tuple = ()
    window: Tuple[float, float] = (0.0, 0.0)
    silent_windows: tuple = ()

    def __post_init__(self):
        times = [ev.time for ev in self.events]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        if self.window[1] < self.window[0]:
            raise ValueError("echo window must be ordered")
        for ev in self.events:
            if isinstance(ev, SignalEvent):
                half = ev.shape.support_half_width(1e-4)
                if not (self.window[1] <= ev.time - half
                        or self.window[0] >= ev.time + half):
                    raise ValueError("echo window overlaps the signal pulse")

    @property
    def signal_events(self):
        return tuple(ev for ev in self.events if isinstance(ev, SignalEvent))

    @property
    def strong_pulse_events(self):
        return tuple(ev for ev in self.events if isinstance(ev, StrongPulseEvent))

    @property
    def detuning_flip_times(self):
        return tuple(ev.time for ev in self.events
                     if isinstance(ev, DetuningFlipEvent))

    @property
    def medium_flip_times(self):
        return tuple(ev.time for ev in self.events
                     if isinstance(ev, MediumFlipEvent))
