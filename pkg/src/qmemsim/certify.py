"""Quantum certification toolkit.

Three layers:

- An exact atomic-chain toy model (truncated Fock space, sequential
  Jaynes-Cummings propagators) whose finite-size results converge to the
  semi-classical absorption/retrieval laws and to the inverted-ensemble
  amplifier.
- Continuous-variable T-V criteria for CRIB/2PE/slow-light memories.
- Photon-counting criteria (autocorrelation, Cauchy-Schwarz, Bell
  visibility) as closed forms, each backed by a brute-force POVM oracle on
  truncated Fock distributions.

The counting oracles work on joint photon-number distributions: every
detector POVM used here is diagonal in photon number, and the loss and
50/50-splitting channels map number-diagonal states to number-diagonal
states, so the distribution calculus is exact within truncation.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import comb

__all__ = [
    "ChainModel", "FockChainState", "DetectorModel", "AmplifierModel",
    "CriterionReport", "TruncationOverflow", "DegenerateGainLoss",
    "chain_propagate", "chain_efficiency", "inverted_emission",
    "click_probability_2pe", "tv_criterion", "g2_memory", "g2_2pe",
    "cauchy_schwarz", "bell_visibility", "povm_click", "NumberState",
    "photon_number_to_p", "p_to_photon_number",
]


class TruncationOverflow(RuntimeError):
    """Amplitude leaked above the Fock-space photon cap."""


class DegenerateGainLoss(UserWarning):
    """Gain exactly balances loss; noise term evaluated by series limit."""


# ---------------------------------------------------------------------------
# Atomic chain toy model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainModel:
    """Chain of N atoms, each coupled once to the field mode.

    The per-atom coupling angle is kappa*tau = sqrt(d/N), so the chain
    reproduces exponential absorption exp(-d) as N grows.
    """

    n_atoms: int
    d: float

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("need at least one atom")
        if self.d < 0:
            raise ValueError("optical depth must be non-negative")
        if self.kappa_tau > 0.3:
            warnings.warn("per-atom coupling sqrt(d/N) above 0.3; the chain "
                          "is far from the weak-coupling regime",
                          UserWarning)

    @property
    def kappa_tau(self) -> float:
        return float(np.sqrt(self.d / self.n_atoms))


class FockChainState:
    """Photon mode + N atoms, restricted to a conserved total excitation.

    The basis is every (photon number n <= n_max, set of excited atoms)
    with n + #excited == total.  The Jaynes-Cummings propagator rotates
    each |g, n> / |e, n-1> pair, conserving the total exactly.
    """

    def __init__(self, n_atoms: int, total: int, n_max: Optional[int] = None):
        self.n_atoms = n_atoms
        self.total = total
        self.n_max = total if n_max is None else n_max
        basis = []
        for k in range(min(total, n_atoms) + 1):
            n = total - k
            if n > self.n_max:
                continue
            for exc in itertools.combinations(range(n_atoms), k):
                basis.append((n, exc))
        self.basis = basis
        self.index = {b: i for i, b in enumerate(basis)}
        self.amp = np.zeros(len(basis), np.complex128)
        self.leak = 0.0

    # -- constructors --------------------------------------------------------

    @classmethod
    def photon(cls, n_atoms: int, n: int = 1,
               n_max: Optional[int] = None) -> "FockChainState":
        """All atoms in the ground state, n photons in the mode."""
        st = cls(n_atoms, n, n_max)
        st.amp[st.index[(n, ())]] = 1.0
        return st

    @classmethod
    def inverted(cls, n_atoms: int,
                 n_max: Optional[int] = None) -> "FockChainState":
        """All atoms excited, field in vacuum."""
        st = cls(n_atoms, n_atoms, n_max)
        st.amp[st.index[(0, tuple(range(n_atoms)))]] = 1.0
        return st

    # -- observables ---------------------------------------------------------

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amp) ** 2))

    def amplitude(self, n: int, excited=()) -> complex:
        return complex(self.amp[self.index[(n, tuple(sorted(excited)))]])

    def photon_distribution(self) -> np.ndarray:
        pn = np.zeros(self.n_max + 1)
        for (n, _exc), a in zip(self.basis, self.amp):
            pn[n] += abs(a) ** 2
        return pn

    def mean_photon_number(self) -> float:
        pn = self.photon_distribution()
        return float(np.sum(np.arange(pn.size) * pn))

    def project_field_vacuum(self) -> "FockChainState":
        """Zero every amplitude with photons present (unnormalized
        conditional state after a successful absorption)."""
        out = FockChainState(self.n_atoms, self.total, self.n_max)
        out.amp = self.amp.copy()
        for i, (n, _exc) in enumerate(self.basis):
            if n != 0:
                out.amp[i] = 0.0
        return out

    def copy(self) -> "FockChainState":
        out = FockChainState(self.n_atoms, self.total, self.n_max)
        out.amp = self.amp.copy()
        out.leak = self.leak
        return out


def _apply_atom(state: FockChainState, atom: int, kt: float):
    """Rotate every |g_atom, n> / |e_atom, n-1> pair in place."""
    amp = state.amp
    for i, (n, exc) in enumerate(state.basis):
        if atom in exc or n < 1:
            continue
        partner = state.index.get((n - 1, tuple(sorted(exc + (atom,)))))
        if partner is None:
            # photon cap cut the pair off; track the rotated-away weight
            c = np.cos(kt * np.sqrt(n))
            state.leak += (1.0 - c * c) * abs(amp[i]) ** 2
            amp[i] *= c
            continue
        c = np.cos(kt * np.sqrt(n))
        s = np.sin(kt * np.sqrt(n))
        g = amp[i]
        e = amp[partner]
        amp[i] = c * g + s * e
        amp[partner] = -s * g + c * e


def chain_propagate(state: FockChainState, model: ChainModel,
                    direction: str = "forward") -> FockChainState:
    """One pass of the chain: atoms interact sequentially with the field.

    "forward" applies atom 1 first (the order of absorption); "backward"
    reverses the order, which realizes backward retrieval.

    Raises:
        TruncationOverflow: if amplitude above the photon cap would be
            needed beyond 1e-10 in probability.
    """
    if model.n_atoms != state.n_atoms:
        raise ValueError("state and model disagree on the atom count")
    order = range(model.n_atoms) if direction == "forward" \
        else reversed(range(model.n_atoms))
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    out = state.copy()
    kt = model.kappa_tau
    for atom in order:
        _apply_atom(out, atom, kt)
    if out.leak > 1e-10:
        raise TruncationOverflow(
            f"probability {out.leak:.2e} leaked above n_max={out.n_max}")
    return out


@dataclass
class ChainEfficiency:
    """Exact finite-N storage-and-retrieval probability and its limits."""

    direction: str
    exact: float
    closed_form: float
    analytic_limit: float
    absorbed_probability: float
    absorbed_limit: float


def chain_efficiency(model: ChainModel,
                     direction: str = "forward") -> ChainEfficiency:
    """Absorb a single photon, condition on absorption, and retrieve.

    The retrieval amplitude is evaluated on the unnormalized conditional
    state, so the result is the joint storage-and-retrieval probability:
    N^2 s^4 c^(2N-2) forward, (1 - c^(2N))^2 backward, converging to
    d^2 exp(-d) and (1 - exp(-d))^2.
    """
    n = model.n_atoms
    c = np.cos(model.kappa_tau)
    s = np.sin(model.kappa_tau)
    st = FockChainState.photon(n, 1)
    absorbed_state = chain_propagate(st, model, "forward")
    p_absorbed = 1.0 - abs(absorbed_state.amplitude(1)) ** 2
    cond = absorbed_state.project_field_vacuum()
    retrieved = chain_propagate(cond, model, direction)
    exact = abs(retrieved.amplitude(1)) ** 2
    if direction == "forward":
        closed = float(n ** 2 * s ** 4 * c ** (2 * n - 2))
        limit = float(model.d ** 2 * np.exp(-model.d))
    else:
        closed = float((1.0 - c ** (2 * n)) ** 2)
        limit = float((1.0 - np.exp(-model.d)) ** 2)
    return ChainEfficiency(
        direction=direction, exact=exact, closed_form=closed,
        analytic_limit=limit, absorbed_probability=p_absorbed,
        absorbed_limit=float(1.0 - np.exp(-model.d)))


@dataclass
class InvertedEmission:
    """Photon emission of a fully inverted chain into the mode."""

    value: float            # bosonic-limit mean photon number e^d - 1
    finite_n: float         # cosh^(2N)(kappa tau) - 1
    exact_mean: float       # mean photon number from the exact chain
    photon_distribution: np.ndarray
    leak: float


def inverted_emission(model: ChainModel, n_max: int = 64) -> InvertedEmission:
    """Mean photon number emitted by an inverted ensemble, e^d - 1.

    The exact finite-N value is computed by passing the field (initially
    vacuum) through every excited atom once; tracing each atom right after
    its interaction is exact for field observables, so the photon
    distribution follows a closed probability recursion.

    Raises:
        TruncationOverflow: if more than 1e-6 probability leaks above
            n_max.
    """
    kt = model.kappa_tau
    p = np.zeros(n_max + 1)
    p[0] = 1.0
    narr = np.arange(n_max + 1)
    c2 = np.cos(kt * np.sqrt(narr + 1.0)) ** 2   # stay at n (atom keeps e)
    s2_up = np.sin(kt * np.sqrt(narr + 1.0)) ** 2  # n -> n+1 (emission)
    leak = 0.0
    for _ in range(model.n_atoms):
        emitted = p * s2_up
        p = p * c2
        p[1:] += emitted[:-1]
        leak += emitted[-1]
    if leak > 1e-6:
        raise TruncationOverflow(
            f"probability {leak:.2e} leaked above n_max={n_max}; "
            "raise n_max or lower d")
    mean = float(np.sum(narr * p))
    return InvertedEmission(
        value=float(np.expm1(model.d)),
        finite_n=float(np.cosh(kt) ** (2 * model.n_atoms) - 1.0),
        exact_mean=mean, photon_distribution=p, leak=leak)


def click_probability_2pe(gain: float, eta: float) -> float:
    """Click probability of a non-resolving detector on the 2PE echo mode.

    The conditionally stored single excitation is amplified with gain
    G = e^d; the detector of efficiency eta then clicks with probability
    1 - 1/(1 + eta (G-1))^2.
    """
    if gain < 1.0:
        raise ValueError("amplifier gain must be >= 1")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("detector efficiency must lie in [0, 1]")
    return float(1.0 - 1.0 / (1.0 + eta * (gain - 1.0)) ** 2)


# ---------------------------------------------------------------------------
# Detector / amplifier models and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorModel:
    """Non-photon-number-resolving detector plus the memory in its path.

    Attributes:
        eta_d: detector efficiency (includes collection loss).
        p_dc: dark-count probability per gate.
        eta_m: efficiency of the memory feeding this detector (1 for a
            direct arm).
    """

    eta_d: float = 1.0
    p_dc: float = 0.0
    eta_m: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta_d <= 1.0:
            raise ValueError("eta_d must lie in [0, 1]")
        if not 0.0 <= self.p_dc < 1.0:
            raise ValueError("p_dc must lie in [0, 1)")
        if not 0.0 <= self.eta_m <= 1.0:
            raise ValueError("eta_m must lie in [0, 1]")

    @property
    def eta(self) -> float:
        """Total arm efficiency eta_d * eta_m."""
        return self.eta_d * self.eta_m


@dataclass(frozen=True)
class AmplifierModel:
    """Inverted-medium amplifier (gain e^d) or its beamsplitter dual."""

    gain: Optional[float] = None
    transmission: Optional[float] = None

    def __post_init__(self):
        if (self.gain is None) == (self.transmission is None):
            raise ValueError("specify exactly one of gain or transmission")
        if self.gain is not None and self.gain < 1.0:
            raise ValueError("gain must be >= 1")
        if self.transmission is not None and not 0.0 < self.transmission <= 1.0:
            raise ValueError("transmission must lie in (0, 1]")

    @classmethod
    def from_depth(cls, d: float, inverted: bool) -> "AmplifierModel":
        return cls(gain=float(np.exp(d))) if inverted \
            else cls(transmission=float(np.exp(-d)))


@dataclass
class CriterionReport:
    """Value of a certification criterion against its quantum threshold."""

    criterion: str
    value: object
    threshold: str
    passes_quantum: bool
    inputs: dict = field(default_factory=dict)


def photon_number_to_p(n: float) -> float:
    """Squeezing parameter from the mean photon number per mode."""
    if n < 0:
        raise ValueError("mean photon number must be non-negative")
    return n / (n + 1.0)


def p_to_photon_number(p: float) -> float:
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    return p / (1.0 - p)


# ---------------------------------------------------------------------------
# T-V (continuous variable) criteria
# ---------------------------------------------------------------------------

def tv_criterion(protocol: str, d: Optional[float] = None,
                 alpha: Optional[float] = None, beta: Optional[float] = None,
                 length: Optional[float] = None) -> CriterionReport:
    """Signal-transfer T and conditional-variance V of a memory.

    Protocols: "crib" (beamsplitter write/read, no gain), "2pe" (amplifying
    read-out) and "slowlight" (distributed gain alpha / loss beta over a
    length, needing all three parameters).  The quantum regime is
    T > 1 together with V < 1.
    """
    if protocol == "crib":
        if d is None:
            raise ValueError("crib needs the optical depth d")
        a = (1.0 - np.exp(-d)) ** 2
        T = 2.0 * a
        V = 1.0 - a
        inputs = {"d": d}
    elif protocol == "2pe":
        if d is None:
            raise ValueError("2pe needs the optical depth d")
        T = 4.0 * np.sinh(0.5 * d) ** 2 / (2.0 * np.exp(d) - 1.0)
        V = 1.0 - np.exp(-d) + np.exp(d)
        inputs = {"d": d}
    elif protocol == "slowlight":
        if alpha is None or beta is None or length is None:
            raise ValueError("slowlight needs alpha, beta and length")
        x = (alpha - beta) * length
        eta = np.exp(x)
        # (1 - eta) * N_f == 2 alpha L (e^x - 1)/x, finite at alpha == beta
        if abs(x) < 1e-8:
            warnings.warn("gain balances loss; added-noise term evaluated "
                          "by its series limit", DegenerateGainLoss)
            phi = 1.0 + 0.5 * x + x * x / 6.0
        else:
            phi = np.expm1(x) / x
        v_noise = 1.0 + 2.0 * alpha * length * phi
        T = 2.0 * eta / (1.0 + v_noise)
        V = 1.0 - eta + v_noise
        inputs = {"alpha": alpha, "beta": beta, "length": length,
                  "eta": float(eta), "v_noise": float(v_noise)}
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    T, V = float(T), float(V)
    return CriterionReport(
        criterion="tv", value={"T": T, "V": V},
        threshold="T > 1 and V < 1",
        passes_quantum=bool(T > 1.0 and V < 1.0), inputs=inputs)


# ---------------------------------------------------------------------------
# Photon-counting closed forms
# ---------------------------------------------------------------------------

def g2_memory(det: DetectorModel) -> CriterionReport:
    """Autocorrelation of a stored-and-retrieved single photon.

    Twofold coincidences over the product of singles behind a 50/50
    splitter, with arm efficiency eta_d*eta_m and dark counts; below 1
    the retrieved field is non-classical.
    """
    eta = det.eta
    q = 1.0 - det.p_dc
    num = 1.0 - 2.0 * q * (1.0 - 0.5 * eta) + q * q * (1.0 - eta)
    den = (1.0 - q * (1.0 - 0.5 * eta)) ** 2
    value = float(num / den)
    return CriterionReport(
        criterion="g2", value=value, threshold="g2 < 1",
        passes_quantum=bool(value < 1.0),
        inputs={"eta_d": det.eta_d, "eta_m": det.eta_m, "p_dc": det.p_dc})


def g2_2pe(d: float, eta_d: float = 1.0) -> float:
    """Echo-mode autocorrelation of a 2PE storing one photon (ideal
    optics, no dark counts): 3/2 at vanishing depth, 1 deep in the
    amplified regime -- never below the classical bound."""
    if d <= 0:
        raise ValueError("optical depth must be positive")
    x_half = 1.0 + 0.5 * eta_d * np.expm1(d)
    x_full = 1.0 + eta_d * np.expm1(d)
    num = 1.0 - 2.0 / x_half ** 2 + 1.0 / x_full ** 2
    den = (1.0 - 1.0 / x_half ** 2) ** 2
    return float(num / den)


def cauchy_schwarz(det_a: DetectorModel, det_b: DetectorModel,
                   p: float) -> CriterionReport:
    """Cauchy-Schwarz parameter of a two-mode squeezed source with mode a
    stored in the memory: cross-coincidences squared over the product of
    the two autocorrelation coincidences.  R > 1 is non-classical."""
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    ea, eb = det_a.eta, det_b.eta
    qa, qb = 1.0 - det_a.p_dc, 1.0 - det_b.p_dc
    omp = 1.0 - p

    def f(eta):
        return omp / (1.0 - p * (1.0 - 0.5 * eta))

    cross = (1.0 - qa * f(ea) - qb * f(eb)
             + qa * qb * omp / (1.0 - p * (1.0 - 0.5 * ea) * (1.0 - 0.5 * eb)))
    auto_a = 1.0 - 2.0 * qa * f(ea) + qa * qa * omp / (1.0 - p * (1.0 - ea))
    auto_b = 1.0 - 2.0 * qb * f(eb) + qb * qb * omp / (1.0 - p * (1.0 - eb))
    value = float(cross ** 2 / (auto_a * auto_b))
    return CriterionReport(
        criterion="cauchy_schwarz", value=value, threshold="R > 1",
        passes_quantum=bool(value > 1.0),
        inputs={"p": p, "eta_a": ea, "eta_b": eb,
                "p_dc_a": det_a.p_dc, "p_dc_b": det_b.p_dc})


def bell_visibility(det_a: DetectorModel, det_b: DetectorModel,
                    p: float) -> CriterionReport:
    """Two-photon interference visibility with the a-side modes stored in
    the memory.  Above 1/3 witnesses entanglement for a singlet mixed
    with white noise."""
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    ea, eb = det_a.eta, det_b.eta
    qa, qb = 1.0 - det_a.p_dc, 1.0 - det_b.p_dc
    omp = 1.0 - p
    fa = omp / (1.0 - p * (1.0 - ea))
    fb = omp / (1.0 - p * (1.0 - eb))
    g = omp / (1.0 - p * (1.0 - ea) * (1.0 - eb))
    num = qa * qb * (g - fa * fb)
    den = 2.0 - 2.0 * qa * fa - 2.0 * qb * fb + qa * qb * (g + fa * fb)
    value = float(num / den)
    return CriterionReport(
        criterion="bell_visibility", value=value, threshold="V > 1/3",
        passes_quantum=bool(value > 1.0 / 3.0),
        inputs={"p": p, "eta_a": ea, "eta_b": eb,
                "p_dc_a": det_a.p_dc, "p_dc_b": det_b.p_dc})


# ---------------------------------------------------------------------------
# Brute-force POVM oracles on photon-number distributions
# ---------------------------------------------------------------------------

class NumberState:
    """Joint photon-number distribution over labeled modes."""

    def __init__(self, modes: Tuple[str, ...], probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != len(modes):
            raise ValueError("one axis per mode required")
        self.modes = tuple(modes)
        self.probs = probs

    @classmethod
    def fock(cls, mode: str, n: int, n_max: int) -> "NumberState":
        p = np.zeros(n_max + 1)
        p[n] = 1.0
        return cls((mode,), p)

    @classmethod
    def thermal(cls, mode: str, nbar: float, n_max: int) -> "NumberState":
        n = np.arange(n_max + 1)
        p = (nbar / (nbar + 1.0)) ** n / (nbar + 1.0)
        return cls((mode,), p)

    @classmethod
    def from_distribution(cls, mode: str, pn) -> "NumberState":
        return cls((mode,), np.asarray(pn, dtype=float))

    @classmethod
    def two_mode_squeezed(cls, p: float, n_max: int,
                          modes=("a", "b")) -> "NumberState":
        n = np.arange(n_max + 1)
        diag = (1.0 - p) * p ** n
        probs = np.zeros((n_max + 1, n_max + 1))
        probs[n, n] = diag
        return cls(tuple(modes), probs)

    def tensor(self, other: "NumberState") -> "NumberState":
        probs = np.multiply.outer(self.probs, other.probs)
        return NumberState(self.modes + other.modes, probs)

    def _axis(self, mode: str) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise KeyError(f"mode {mode!r} not in {self.modes}") from None

    def loss(self, mode: str, eta: float) -> "NumberState":
        """Transmission eta applied to one mode (binomial channel)."""
        ax = self._axis(mode)
        n_max = self.probs.shape[ax] - 1
        n = np.arange(n_max + 1)
        B = comb(n[None, :], n[:, None]) * eta ** n[:, None] \
            * (1.0 - eta) ** np.maximum(n[None, :] - n[:, None], 0)
        B = np.where(n[:, None] <= n[None, :], B, 0.0)
        probs = np.moveaxis(np.tensordot(B, self.probs, axes=(1, ax)), 0, ax)
        return NumberState(self.modes, probs)

    def split(self, mode: str, into: Tuple[str, str]) -> "NumberState":
        """50/50 beamsplitter: one mode becomes a correlated pair."""
        ax = self._axis(mode)
        n_max = self.probs.shape[ax] - 1
        n = np.arange(n_max + 1)
        # T[k, m, n] = P(k in arm 1, m in arm 2 | n) with k + m = n
        T = np.zeros((n_max + 1, n_max + 1, n_max + 1))
        for ntot in range(n_max + 1):
            k = np.arange(ntot + 1)
            T[k, ntot - k, ntot] = comb(ntot, k) * 0.5 ** ntot
        moved = np.moveaxis(self.probs, ax, -1)
        probs = np.tensordot(moved, T, axes=(-1, 2))
        modes = tuple(m for m in self.modes if m != mode) + tuple(into)
        return NumberState(modes, probs)

    def marginal(self, mode: str) -> np.ndarray:
        ax = self._axis(mode)
        axes = tuple(i for i in range(self.probs.ndim) if i != ax)
        return self.probs.sum(axis=axes)

    def expect(self, vectors: Dict[str, np.ndarray]) -> float:
        """Expectation of a product of per-mode diagonal operators."""
        out = self.probs
        # contract the listed modes with their vectors, sum out the rest
        for ax in reversed(range(len(self.modes))):
            mode = self.modes[ax]
            if mode in vectors:
                out = np.tensordot(out, np.asarray(vectors[mode]),
                                   axes=(ax, 0))
            else:
                out = out.sum(axis=ax)
        return float(out)


def click_vector(n_max: int, eta: float, p_dc: float) -> np.ndarray:
    """P(click | n photons) for a non-resolving detector."""
    n = np.arange(n_max + 1)
    return 1.0 - (1.0 - p_dc) * (1.0 - eta) ** n


def split_click_vector(n_max: int, eta: float, p_dc: float) -> np.ndarray:
    """P(one named arm clicks | n photons on a 50/50 splitter)."""
    n = np.arange(n_max + 1)
    out = np.zeros(n_max + 1)
    for ntot in range(n_max + 1):
        k = np.arange(ntot + 1)
        w = comb(ntot, k) * 0.5 ** ntot
        out[ntot] = np.sum(w * (1.0 - (1.0 - p_dc) * (1.0 - eta) ** k))
    return out


def split_coincidence_vector(n_max: int, eta: float,
                             p_dc: float) -> np.ndarray:
    """P(both arms click | n photons on a 50/50 splitter)."""
    out = np.zeros(n_max + 1)
    for ntot in range(n_max + 1):
        k = np.arange(ntot + 1)
        w = comb(ntot, k) * 0.5 ** ntot
        ck = 1.0 - (1.0 - p_dc) * (1.0 - eta) ** k
        out[ntot] = np.sum(w * ck * ck[::-1])
    return out


def povm_click(state, mode: Optional[str] = None, eta: float = 1.0,
               p_dc: float = 0.0) -> float:
    """Click probability of a non-resolving detector on one mode.

    The POVM element is 1 - (1 - p_dc)(1 - eta)^n.  ``state`` may be a
    NumberState (give the mode label), a FockChainState (its field mode is
    used) or a plain photon-number distribution.
    """
    if isinstance(state, NumberState):
        if mode is None:
            raise ValueError("give the mode label for a NumberState")
        pn = state.marginal(mode)
    elif isinstance(state, FockChainState):
        pn = state.photon_distribution()
    else:
        pn = np.asarray(state, dtype=float)
        if abs(pn.sum() - 1.0) > 1e-9:
            raise ValueError("photon-number distribution must sum to 1")
    return float(np.sum(pn * click_vector(pn.size - 1, eta, p_dc)))


# -- oracle computations matched against the closed forms -------------------

def g2_memory_oracle(det: DetectorModel, n_max: int = 8) -> float:
    """Brute force for g2_memory: single photon, memory loss, splitter,
    two noisy detectors."""
    st = NumberState.fock("a", 1, n_max).loss("a", det.eta_m)
    st = st.split("a", ("d1", "d2"))
    c = click_vector(n_max, det.eta_d, det.p_dc)
    both = st.expect({"d1": c, "d2": c})
    s1 = st.expect({"d1": c})
    s2 = st.expect({"d2": c})
    return float(both / (s1 * s2))


def amplified_single_excitation(gain: float, n_max: int) -> np.ndarray:
    """Photon distribution of an amplifier seeded by one collective atomic
    excitation and vacuum input, from the two-mode-squeezing generator
    integrated in truncated Fock space (independent of the closed forms)."""
    from scipy.sparse import lil_matrix
    from scipy.sparse.linalg import expm_multiply
    dim = n_max + 1
    K = lil_matrix((dim * dim, dim * dim))
    for na in range(n_max):
        for nb in range(n_max):
            # a^dag b^dag |na nb> amplitude sqrt((na+1)(nb+1))
            K[(na + 1) * dim + (nb + 1), na * dim + nb] = \
                np.sqrt((na + 1) * (nb + 1))
            K[na * dim + nb, (na + 1) * dim + (nb + 1)] = \
                -np.sqrt((na + 1) * (nb + 1))
    r = float(np.arccosh(np.sqrt(gain)))
    psi0 = np.zeros(dim * dim)
    psi0[0 * dim + 1] = 1.0  # vacuum field, one atomic excitation
    psi = expm_multiply(r * K.tocsr(), psi0)
    prob = np.abs(psi.reshape(dim, dim)) ** 2
    if prob.sum() < 1.0 - 1e-9:
        raise TruncationOverflow("amplified state leaked above n_max")
    return prob.sum(axis=1)


def g2_2pe_oracle(d: float, eta_d: float = 1.0, n_max: int = 80) -> float:
    """Brute force for g2_2pe: the amplified echo mode measured behind a
    50/50 splitter with two ideal-dark-count detectors."""
    pn = amplified_single_excitation(float(np.exp(d)), n_max)
    both = float(np.sum(pn * split_coincidence_vector(n_max, eta_d, 0.0)))
    single = float(np.sum(pn * split_click_vector(n_max, eta_d, 0.0)))
    return both / single ** 2


def cauchy_schwarz_oracle(det_a: DetectorModel, det_b: DetectorModel,
                          p: float, n_max: int = 120) -> float:
    """Brute force for cauchy_schwarz on the two-mode squeezed source."""
    st = NumberState.two_mode_squeezed(p, n_max)
    st = st.loss("a", det_a.eta_m).loss("b", det_b.eta_m)
    cross_a = split_click_vector(n_max, det_a.eta_d, det_a.p_dc)
    cross_b = split_click_vector(n_max, det_b.eta_d, det_b.p_dc)
    coin_a = split_coincidence_vector(n_max, det_a.eta_d, det_a.p_dc)
    coin_b = split_coincidence_vector(n_max, det_b.eta_d, det_b.p_dc)
    cross = st.expect({"a": cross_a, "b": cross_b})
    auto_a = st.expect({"a": coin_a})
    auto_b = st.expect({"b": coin_b})
    return float(cross ** 2 / (auto_a * auto_b))


def bell_visibility_oracle(det_a: DetectorModel, det_b: DetectorModel,
                           p: float, n_max: int = 120) -> float:
    """Brute force for bell_visibility on the four-mode polarization
    source (two independent squeezed pairs)."""
    pair = NumberState.two_mode_squeezed(p, n_max, modes=("ah", "bv"))
    pair = pair.loss("ah", det_a.eta_m)
    ca = click_vector(n_max, det_a.eta_d, 0.0)
    cb = click_vector(n_max, det_b.eta_d, 0.0)
    qa, qb = 1.0 - det_a.p_dc, 1.0 - det_b.p_dc
    # click probabilities including dark counts: 1 - q (1 - c_eta)
    ca_dc = 1.0 - qa * (1.0 - ca)
    cb_dc = 1.0 - qb * (1.0 - cb)
    # orthogonal-polarization coincidence: both detectors see one pair
    c_max = pair.expect({"ah": ca_dc, "bv": cb_dc})
    # identical-polarization coincidence: detectors see independent pairs
    sa = pair.expect({"ah": ca_dc})
    sb = pair.expect({"bv": cb_dc})
    c_min = sa * sb
    return float((c_max - c_min) / (c_max + c_min))
