"""Certification criteria, the chain toy model and the POVM oracles."""

import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qmemsim import certify as ct


# ---------------------------------------------------------------------------
# chain toy model
# ---------------------------------------------------------------------------

def test_vacuum_is_a_fixed_point():
    st = ct.FockChainState.photon(4, 0)
    out = ct.chain_propagate(st, ct.ChainModel(4, 0.2))
    assert abs(out.amplitude(0) - 1.0) < 1e-14


def test_single_atom_transform():
    m = ct.ChainModel(1, 0.04)
    out = ct.chain_propagate(ct.FockChainState.photon(1, 1), m)
    kt = m.kappa_tau
    assert abs(out.amplitude(1) - np.cos(kt)) < 1e-14
    assert abs(out.amplitude(0, (0,)) - (-np.sin(kt))) < 1e-14


def test_absorption_converges_to_exponential():
    m = ct.ChainModel(100, 2.0)
    eff = ct.chain_efficiency(m, "forward")
    assert abs(eff.absorbed_probability - (1 - np.exp(-2.0))) < 1.5 / 100


def test_norm_and_total_excitation_conserved():
    rng = np.random.default_rng(3)
    st = ct.FockChainState(6, total=3, n_max=5)
    st.amp = rng.normal(size=st.amp.size) \
        + 1j * rng.normal(size=st.amp.size)
    st.amp /= np.sqrt(st.norm)
    out = ct.chain_propagate(st, ct.ChainModel(6, 0.5))
    assert abs(out.norm - 1.0) < 1e-12
    # every basis state carries the same conserved total by construction
    assert all(n + len(exc) == 3 for n, exc in out.basis)


@pytest.mark.parametrize("direction,closed", [
    ("forward", lambda n, c, s: n ** 2 * s ** 4 * c ** (2 * n - 2)),
    ("backward", lambda n, c, s: (1 - c ** (2 * n)) ** 2),
])
def test_chain_efficiency_matches_its_closed_form(direction, closed):
    for n, d in ((10, 0.5), (50, 2.0), (200, 1.0)):
        m = ct.ChainModel(n, d)
        eff = ct.chain_efficiency(m, direction)
        c, s = np.cos(m.kappa_tau), np.sin(m.kappa_tau)
        assert abs(eff.exact - closed(n, c, s)) < 1e-12
        assert abs(eff.exact - eff.closed_form) < 1e-12


def test_chain_limits_improve_with_size():
    for d in (0.5, 2.0):
        errs = []
        for n in (10, 50, 200):
            eff = ct.chain_efficiency(ct.ChainModel(n, d), "forward")
            errs.append(abs(eff.exact - eff.analytic_limit))
        assert errs[0] > errs[1] > errs[2]


def test_inverted_emission_against_the_exact_state_vector():
    """The per-atom trace-out recursion reproduces the full state-vector
    chain exactly for a small ensemble."""
    m = ct.ChainModel(6, 0.8)
    sv = ct.chain_propagate(ct.FockChainState.inverted(6, n_max=6), m)
    channel = ct.inverted_emission(m, n_max=10)
    assert abs(sv.mean_photon_number() - channel.exact_mean) < 1e-12


def test_inverted_emission_example():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        m = ct.ChainModel(50, 0.5)
        inv = ct.inverted_emission(m, n_max=30)
    assert abs(inv.value - (np.e ** 0.5 - 1.0)) < 1e-12
    assert abs(inv.exact_mean - inv.finite_n) < 0.02 * inv.finite_n
    # the bosonic finite-size value converges to e^d - 1
    assert abs(inv.finite_n - inv.value) < 0.02 * inv.value


def test_inverted_emission_truncation_guard():
    with pytest.raises(ct.TruncationOverflow):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            ct.inverted_emission(ct.ChainModel(200, 4.0), n_max=20)


def test_zero_depth_is_inert():
    m = ct.ChainModel(10, 0.0)
    assert ct.chain_efficiency(m, "forward").exact == 0.0
    assert ct.chain_efficiency(m, "backward").exact == 0.0
    assert ct.inverted_emission(m, n_max=4).exact_mean == 0.0


# ---------------------------------------------------------------------------
# amplifier click statistics
# ---------------------------------------------------------------------------

def test_click_probability_limits():
    assert ct.click_probability_2pe(5.0, 0.0) == 0.0
    assert ct.click_probability_2pe(2000.0, 0.9) > 0.998
    assert abs(ct.click_probability_2pe(2.0, 0.5) - (1 - 1 / 1.5 ** 2)) < 1e-12


def test_click_probability_against_the_moment_series():
    """Brute force from the amplified moments <a^k a^k> = (k+1)! (G-1)^k."""
    G, eta = 1.8, 0.45
    k = np.arange(1, 200)
    series = -np.sum((-eta) ** k * (k + 1) * (G - 1.0) ** k)
    assert abs(ct.click_probability_2pe(G, eta) - series) < 1e-12


def test_click_probability_against_the_fock_oracle():
    pn = ct.amplified_single_excitation(2.0, 60)
    got = ct.povm_click(pn, eta=0.5)
    assert abs(got - ct.click_probability_2pe(2.0, 0.5)) < 1e-12


# ---------------------------------------------------------------------------
# T-V criteria
# ---------------------------------------------------------------------------

def test_crib_tv_reaches_the_quantum_corner():
    rep = ct.tv_criterion("crib", d=50.0)
    assert abs(rep.value["T"] - 2.0) < 1e-12
    assert rep.value["V"] < 1e-12
    assert rep.passes_quantum
    # vacuum passthrough boundary
    rep0 = ct.tv_criterion("crib", d=0.0)
    assert rep0.value["T"] == 0.0 and rep0.value["V"] == 1.0
    assert not rep0.passes_quantum


def test_crib_tv_threshold_depth():
    d_star = -np.log(1.0 - 2.0 ** -0.5)
    below = ct.tv_criterion("crib", d=d_star - 1e-6)
    above = ct.tv_criterion("crib", d=d_star + 1e-6)
    assert not below.passes_quantum and above.passes_quantum


def test_2pe_never_enters_the_quantum_region():
    for d in np.linspace(0.1, 10.0, 100):
        rep = ct.tv_criterion("2pe", d=d)
        assert not rep.passes_quantum
        assert rep.value["V"] > 1.0


def test_crib_tv_consistent_with_the_chain():
    for d in (0.5, 1.0, 2.0):
        T = ct.tv_criterion("crib", d=d).value["T"]
        backward = (1.0 - np.exp(-d)) ** 2
        assert abs(0.5 * T - backward) < 1e-12


def test_slowlight_tv_branch():
    rep = ct.tv_criterion("slowlight", alpha=0.2, beta=1.0, length=1.0)
    eta = np.exp(-0.8)
    nf = 2 * 0.2 / 0.8
    v_noise = 1 + (1 - eta) * nf
    assert_allclose(rep.value["V"], 1 - eta + v_noise, rtol=1e-12)
    assert_allclose(rep.value["T"], 2 * eta / (1 + v_noise), rtol=1e-12)
    with pytest.warns(ct.DegenerateGainLoss):
        lim = ct.tv_criterion("slowlight", alpha=0.5, beta=0.5, length=1.0)
    # eta -> 1 and v_noise -> 1 + 2 alpha L = 2
    assert_allclose(lim.value["V"], 2.0, rtol=1e-9)
    assert_allclose(lim.value["T"], 2.0 / 3.0, rtol=1e-9)


# ---------------------------------------------------------------------------
# counting criteria vs oracles
# ---------------------------------------------------------------------------

GRID_P = (0.05, 0.2, 0.5)
GRID_ETA = (0.3, 0.6, 0.9)
GRID_PDC = (0.0, 0.01, 0.05)


def test_g2_memory_noise_free_is_zero():
    for eta in (1.0, 0.3, 0.02):
        det = ct.DetectorModel(eta_d=eta, p_dc=0.0, eta_m=0.5)
        assert abs(ct.g2_memory(det).value) < 1e-10
        assert ct.g2_memory(det).passes_quantum


def test_g2_memory_matches_oracle_everywhere():
    for eta in GRID_ETA:
        for pdc in GRID_PDC:
            for eta_m in (0.1, 0.6, 1.0):
                det = ct.DetectorModel(eta_d=eta, p_dc=pdc, eta_m=eta_m)
                assert abs(ct.g2_memory(det).value
                           - ct.g2_memory_oracle(det)) < 1e-10


def test_g2_memory_monotone_in_noise_and_efficiency():
    values = [ct.g2_memory(ct.DetectorModel(eta_d=0.4, p_dc=p)).value
              for p in np.linspace(0.0, 0.5, 11)]
    assert np.all(np.diff(values) > 0)
    values = [ct.g2_memory(ct.DetectorModel(eta_d=e, p_dc=0.02)).value
              for e in np.linspace(0.05, 1.0, 11)]
    assert np.all(np.diff(values) < 0)


def test_g2_memory_stays_below_one():
    """Dark counts dilute the antibunching toward (but never past) the
    classical bound; near the low-efficiency boundary p_dc ~ 3 eta the
    margin closes to a few percent."""
    det = ct.DetectorModel(eta_d=1.0, p_dc=0.03, eta_m=0.01)
    val = ct.g2_memory(det).value
    assert 0.97 < val < 1.0


def test_g2_2pe_limits_and_oracle():
    assert abs(ct.g2_2pe(1e-3) - 1.5) < 1e-3
    assert abs(ct.g2_2pe(8.0, 1.0) - 1.0) < 1e-3
    for d in (0.5, 1.0, 2.0):
        for eta in (0.4, 1.0):
            assert abs(ct.g2_2pe(d, eta)
                       - ct.g2_2pe_oracle(d, eta)) < 1e-10
    assert not ct.g2_2pe(1.0, 1.0) < 1.0  # never non-classical


def test_cauchy_schwarz_matches_oracle_on_grid():
    worst = 0.0
    for p in GRID_P:
        for eta in GRID_ETA:
            for pdc in GRID_PDC:
                det = ct.DetectorModel(eta_d=eta, p_dc=pdc)
                got = ct.cauchy_schwarz(det, det, p).value
                oracle = ct.cauchy_schwarz_oracle(det, det, p)
                worst = max(worst, abs(got - oracle))
    assert worst < 1e-10


def test_cauchy_schwarz_ideal_small_p_limit():
    p = 1e-3
    ideal = ct.DetectorModel()
    got = ct.cauchy_schwarz(ideal, ideal, p).value
    assert abs(got - 0.25 * (1 + 1 / p) ** 2) < 0.005 * got
    assert got > 1.0


def test_bell_visibility_matches_oracle_on_grid():
    worst = 0.0
    for p in GRID_P:
        for eta in GRID_ETA:
            for pdc in GRID_PDC:
                det = ct.DetectorModel(eta_d=eta, p_dc=pdc)
                got = ct.bell_visibility(det, det, p).value
                oracle = ct.bell_visibility_oracle(det, det, p)
                worst = max(worst, abs(got - oracle))
    assert worst < 1e-10


def test_bell_visibility_ideal_and_noise_washout():
    ideal = ct.DetectorModel()
    got = ct.bell_visibility(ideal, ideal, 0.01).value
    assert abs(got - 0.99 / 1.01) < 1e-10
    noisy = ct.DetectorModel(eta_d=1.0, p_dc=0.999)
    assert ct.bell_visibility(noisy, ideal, 0.01).value < 1e-2


def test_povm_click_examples():
    n_max = 6
    assert abs(ct.povm_click(ct.NumberState.fock("a", 0, n_max), "a",
                             0.7, 0.03) - 0.03) < 1e-12
    assert abs(ct.povm_click(ct.NumberState.fock("a", 1, n_max), "a",
                             0.7, 0.0) - 0.7) < 1e-12
    th = ct.NumberState.thermal("a", 1.7, 600)
    assert abs(ct.povm_click(th, "a", 1.0, 0.0) - 1.7 / 2.7) < 1e-9


def test_number_state_split_matches_halved_efficiency():
    """Detecting one arm of a 50/50 splitter equals halving the detector
    efficiency on the source mode."""
    st = ct.NumberState.thermal("a", 0.8, 80)
    split = st.split("a", ("u", "v"))
    c = ct.click_vector(80, 0.6, 0.01)
    via_split = split.expect({"u": c})
    direct = ct.povm_click(st, "a", 0.3, 0.01)
    assert abs(via_split - direct) < 1e-12


def test_mean_photon_conversions():
    assert abs(ct.photon_number_to_p(1.0) - 0.5) < 1e-15
    assert abs(ct.p_to_photon_number(0.5) - 1.0) < 1e-15
    with pytest.raises(ValueError):
        ct.p_to_photon_number(1.0)
