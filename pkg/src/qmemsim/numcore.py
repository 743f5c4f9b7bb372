"""Shared numerical substrate for the memory simulations.

Time/frequency grids with a fixed Fourier convention, pulse-shape
generators, detuning distributions with trapezoid quadrature, and linear
transfer-function propagation of complex envelopes.

Everything here is dimensionless.  The unit of time is the inverse of the
relevant linewidth (``gamma0 = 1`` in most scenarios) and field envelopes
are expressed in Rabi-frequency units.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class GridTooShort(ValueError):
    """A rendered pulse does not fit on the time grid (clipped tails)."""


class AliasRisk(ValueError):
    """A spectral operation would wrap around the periodic grid."""


# ---------------------------------------------------------------------------
# Time grid and envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid of ``n`` samples starting at ``t0`` with step ``dt``.

    The paired frequency grid follows the convention
    ``f~(w) = integral f(t) exp(-i w t) dt`` with angular frequencies
    ``w_k = 2 pi k / (n dt)`` in FFT order, so a forward/inverse transform
    round-trips to the identity.
    """

    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n < 8:
            raise ValueError("need at least 8 samples")
        if self.n & (self.n - 1):
            raise ValueError("n must be a power of two")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def omegas(self) -> np.ndarray:
        """Angular frequencies in FFT order (spacing ``2 pi / (n dt)``)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dt)

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def nyquist(self) -> float:
        return np.pi / self.dt

    @classmethod
    def spanning(cls, t_min: float, t_max: float, dt_max: float,
                 n_min: int = 8, n_max: int = 1 << 22) -> "TimeGrid":
        """Smallest power-of-two grid covering ``[t_min, t_max]`` with step <= dt_max."""
        span = float(t_max - t_min)
        if span <= 0:
            raise ValueError("empty time span")
        n = n_min
        while n * dt_max < span:
            n *= 2
            if n > n_max:
                raise ValueError("grid size limit exceeded")
        return cls(t0=float(t_min), dt=span / n, n=n)


@dataclass(frozen=True)
class ComplexEnvelope:
    """Uniformly sampled complex field envelope E(t) at one position.

    Attributes:
        grid: the time grid the samples live on.
        samples: complex amplitudes, in Rabi-frequency units.
    """

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.shape != (self.grid.n,):
            raise ValueError("samples must match the grid length")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def energy(self) -> float:
        """Time-integrated intensity, sum |E|^2 dt."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    @property
    def area(self) -> complex:
        """Complex pulse area, integral of E(t) dt."""
        return complex(np.sum(self.samples) * self.grid.dt)

    def with_samples(self, samples: np.ndarray) -> "ComplexEnvelope":
        return replace(self, samples=samples)

    def energy_after(self, cut: float) -> float:
        """Energy carried after time ``cut`` (trapezoid-free simple sum)."""
        mask = self.grid.times >= cut
        return float(np.sum(np.abs(self.samples[mask]) ** 2) * self.grid.dt)

    def peak_time(self) -> float:
        return float(self.grid.times[int(np.argmax(np.abs(self.samples)))])

    def centroid(self) -> float:
        """Intensity-weighted first moment of |E|^2."""
        w = np.abs(self.samples) ** 2
        tot = np.sum(w)
        if tot == 0:
            return float("nan")
        return float(np.sum(self.grid.times * w) / tot)


# ---------------------------------------------------------------------------
# Pulse shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PulseShape:
    """Analytic pulse description rendered onto a grid by :func:`render_pulse`.

    Attributes:
        kind: "gaussian", "sech-chirped" or "square".
        center: pulse center time.
        width: Gaussian standard deviation, sech time constant, or full
            width of the square pulse.
        area: requested pulse area theta = integral |Omega(t)| dt (radians).
        chirp: frequency sweep rate at the pulse center (sech-chirped only);
            the instantaneous detuning follows ``chirp * width * tanh``.
    """

    kind: str
    center: float
    width: float
    area: float
    chirp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "sech-chirped", "square"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.kind != "sech-chirped" and self.chirp != 0.0:
            raise ValueError("chirp is only meaningful for sech-chirped pulses")

    @property
    def peak_amplitude(self) -> float:
        if self.kind == "gaussian":
            return self.area / (self.width * np.sqrt(2.0 * np.pi))
        if self.kind == "square":
            return self.area / self.width
        return self.area / (np.pi * self.width)

    @property
    def sweep_half_width(self) -> float:
        """Half extent of the sech frequency sweep, ``mu * beta``."""
        return abs(self.chirp) * self.width

    def support_half_width(self, tail: float = 1e-8) -> float:
        """Half width outside which the envelope falls below ``tail`` of peak."""
        if self.kind == "gaussian":
            return self.width * np.sqrt(-2.0 * np.log(tail))
        if self.kind == "square":
            return 0.5 * self.width
        # sech: 2 exp(-|t|/w) < tail
        return self.width * np.log(2.0 / tail)


def render_pulse(shape: PulseShape, grid: TimeGrid) -> ComplexEnvelope:
    """Sample a pulse shape onto a time grid.

    The rendered area (Riemann sum) matches the requested area to better
    than 1e-6 relative for pulses resolved by at least ~3 samples per width.

    Raises:
        GridTooShort: if the pulse tails are clipped above 1e-8 of peak,
            or the shape is too narrow for the grid step.
    """
    t = grid.times
    half = shape.support_half_width()
    if shape.center - half < t[0] - 0.5 * grid.dt or \
            shape.center + half > t[-1] + 0.5 * grid.dt:
        raise GridTooShort(
            f"{shape.kind} pulse at t={shape.center} (half-width {half:.3g}) "
            f"clipped by grid [{t[0]:.3g}, {t[-1]:.3g}]")

    if shape.kind == "gaussian":
        if shape.width < 3.0 * grid.dt:
            raise GridTooShort("gaussian narrower than 3 grid steps")
        amp = shape.peak_amplitude
        samples = amp * np.exp(-0.5 * ((t - shape.center) / shape.width) ** 2)
        samples = samples.astype(np.complex128)
    elif shape.kind == "square":
        # Fractional overlap of each sample cell with the square support, so
        # the discrete area is exact regardless of where the edges fall.
        lo, hi = shape.center - 0.5 * shape.width, shape.center + 0.5 * shape.width
        cell_lo, cell_hi = t - 0.5 * grid.dt, t + 0.5 * grid.dt
        overlap = np.clip(np.minimum(hi, cell_hi) - np.maximum(lo, cell_lo),
                          0.0, grid.dt)
        samples = (shape.peak_amplitude * overlap / grid.dt).astype(np.complex128)
    else:  # sech-chirped
        if shape.width < 3.0 * grid.dt:
            raise GridTooShort("sech pulse narrower than 3 grid steps")
        x = (t - shape.center) / shape.width
        mu = shape.chirp * shape.width ** 2
        # phase(t) = mu * ln cosh(x); instantaneous detuning mu/width * tanh(x)
        log_cosh = np.abs(x) + np.log1p(np.exp(-2.0 * np.abs(x))) - np.log(2.0)
        samples = shape.peak_amplitude / np.cosh(x) * np.exp(1j * mu * log_cosh)

    return ComplexEnvelope(grid, samples)


# ---------------------------------------------------------------------------
# Fourier transforms
# ---------------------------------------------------------------------------

def forward_transform(env: ComplexEnvelope) -> np.ndarray:
    """Spectrum f~(w) = integral f(t) exp(-i w t) dt, FFT frequency order."""
    grid = env.grid
    return grid.dt * np.fft.fft(env.samples) * np.exp(-1j * grid.omegas * grid.t0)


def inverse_transform(spectrum: np.ndarray, grid: TimeGrid) -> ComplexEnvelope:
    """Inverse of :func:`forward_transform` on the same grid."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if spectrum.shape != (grid.n,):
        raise ValueError("spectrum length must match the grid")
    samples = np.fft.ifft(spectrum * np.exp(1j * grid.omegas * grid.t0)) / grid.dt
    return ComplexEnvelope(grid, samples)


# ---------------------------------------------------------------------------
# Detuning distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetuningDistribution:
    """Inhomogeneous detuning distribution g(Delta) discretized for quadrature.

    Kinds:
        "flat": g = 1 over the span (ideal broad inhomogeneous line).
        "lorentzian-hole": g = 1 - 1/(1 + (Delta/gamma0)^2), a spectral hole
            of width gamma0 burnt into a flat background.
        "delta-resonant": a single resonant class representing a homogeneous
            line of width gamma0; its quadrature weight is pi*gamma0 so the
            polarization source reduces to the homogeneous form.
    """

    kind: str
    gamma0: float = 1.0
    span: tuple = (-20.0, 20.0)
    nclasses: int = 801

    def __post_init__(self):
        if self.kind not in ("flat", "lorentzian-hole", "delta-resonant"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind != "delta-resonant":
            if self.span[1] <= self.span[0]:
                raise ValueError("span must be increasing")
            if self.nclasses < 3:
                raise ValueError("need at least 3 classes")
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")

    def g(self, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        if self.kind == "lorentzian-hole":
            return 1.0 - 1.0 / (1.0 + (delta / self.gamma0) ** 2)
        return np.ones_like(delta)

    def nodes(self) -> np.ndarray:
        if self.kind == "delta-resonant":
            return np.zeros(1)
        return np.linspace(self.span[0], self.span[1], self.nclasses)

    def weights(self) -> np.ndarray:
        """Quadrature weights w_k such that integral g P dDelta ~ sum w_k P_k.

        Trapezoid rule times g(Delta_k); for the single resonant class the
        weight is pi*gamma0 (Dirac-comb limit of a homogeneous line).
        """
        if self.kind == "delta-resonant":
            return np.array([np.pi * self.gamma0])
        nodes = self.nodes()
        w = np.full(self.nclasses, nodes[1] - nodes[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        return w * self.g(nodes)

    def quadrature_of_g(self) -> float:
        """Plain quadrature of g over the span (convergence diagnostic)."""
        return float(np.sum(self.weights()))

    def refine(self, factor: int = 2) -> "DetuningDistribution":
        if self.kind == "delta-resonant":
            return self
        return replace(self, nclasses=(self.nclasses - 1) * factor + 1)


# ---------------------------------------------------------------------------
# Transfer functions (frequency-domain propagation)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransferFunction:
    """Closed-form propagation constant alpha~(w) for one medium archetype.

    Kinds and their complex propagation exponents over the full length L
    (the free-space phase is dropped throughout):

        "inverted-lorentzian": -(d/2) * i w / (gamma0 + i w)
            transparency window of width gamma0; pure group delay d/(2 gamma0)
            for bandwidths well inside the window.
        "lorentzian": -(d/2) * gamma0 / (gamma0 + i w)
            absorption window; retarded (generalized slow-light) response
            on a timescale 1/(d gamma0).
        "eit": -(d/2) * gamma / (i w + gamma - i rabi^2 / (4 w))
            three-level transparency opened by a resonant control field.
        "raman": -(d/2) * gamma / (i (w - detuning) + gamma
                                    - i rabi^2 / (4 (w - two_photon)))
            off-resonant Raman absorption peak.

    ``d`` is the optical depth of the *background* line, so intensity far
    from any structure transmits as exp(-d).
    """

    kind: str
    d: float
    gamma0: float = 1.0
    gamma: float = 1.0
    rabi: float = 0.0
    detuning: float = 0.0
    two_photon: float = 0.0

    def __post_init__(self):
        if self.kind not in ("inverted-lorentzian", "lorentzian", "eit", "raman"):
            raise ValueError(f"unknown transfer kind {self.kind!r}")
        if self.d < 0:
            raise ValueError("optical depth must be non-negative")

    def exponent(self, omega) -> np.ndarray:
        """Full-length propagation exponent L*alpha~(w)."""
        w = np.asarray(omega, dtype=np.complex128)
        half_d = 0.5 * self.d
        if self.kind == "inverted-lorentzian":
            return -half_d * (1j * w) / (self.gamma0 + 1j * w)
        if self.kind == "lorentzian":
            return -half_d * self.gamma0 / (self.gamma0 + 1j * w)
        if self.kind == "eit":
            with np.errstate(divide="ignore", invalid="ignore"):
                denom = 1j * w + self.gamma - 1j * self.rabi ** 2 / (4.0 * w)
                out = -half_d * self.gamma / denom
            return np.where(w == 0, 0.0, out)
        # raman
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = (1j * (w - self.detuning) + self.gamma
                     - 1j * self.rabi ** 2 / (4.0 * (w - self.two_photon)))
            out = -half_d * self.gamma / denom
        return np.where(w == self.two_photon, 0.0, out)

    def response(self, omega) -> np.ndarray:
        """Amplitude filter exp(L*alpha~(w))."""
        return np.exp(self.exponent(omega))


def apply_transfer(env: ComplexEnvelope, tf: TransferFunction,
                   edge_samples: int = 8,
                   tail_threshold: float = 1e-4) -> ComplexEnvelope:
    """Propagate an envelope through a linear medium in the spectral domain.

    Returns the inverse transform of ``E~(0,w) * exp(L alpha~(w))``; the
    free-space phase is dropped, i.e. the result is in the frame that
    co-moves with the vacuum pulse.

    Raises:
        AliasRisk: if the input spectrum carries weight at the grid Nyquist
            edge (> 1e-6 of total energy in the outer 10% band), or if the
            delayed output wraps around the periodic grid (envelope at the
            grid edges above ``tail_threshold`` of peak).
    """
    spectrum = forward_transform(env)
    power = np.abs(spectrum) ** 2
    total = float(np.sum(power))
    if total > 0:
        outer = np.abs(env.grid.omegas) > 0.9 * env.grid.nyquist
        if float(np.sum(power[outer])) > 1e-6 * total:
            raise AliasRisk("input spectrum reaches the grid Nyquist band")

    out = inverse_transform(spectrum * tf.response(env.grid.omegas), env.grid)

    peak = float(np.max(np.abs(out.samples)))
    n_edge = min(max(2, edge_samples), env.grid.n // 4)
    edge = max(float(np.max(np.abs(out.samples[:n_edge]))),
               float(np.max(np.abs(out.samples[-n_edge:]))))
    if peak > 0 and edge > tail_threshold * peak:
        raise AliasRisk(
            f"output tail at grid edge is {edge / peak:.2e} of peak; "
            "extend the grid to avoid wrap-around")
    return out


def shaded_area_efficiency(inp: ComplexEnvelope, out: ComplexEnvelope,
                           cut: float) -> float:
    """Storable energy fraction read off a slow-light trace.

    Output energy after the cut minus the input energy that leaks past the
    cut, both as fractions of the total input energy; clamped to [0, 1].
    """
    if inp.grid != out.grid:
        raise ValueError("input and output must share a grid")
    e_in = inp.energy
    if e_in <= 0:
        raise ValueError("input envelope has no energy")
    frac = (out.energy_after(cut) - inp.energy_after(cut)) / e_in
    return float(np.clip(frac, 0.0, 1.0))
