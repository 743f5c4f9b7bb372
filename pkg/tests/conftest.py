"""Shared fixtures: the expensive reference simulations run once per
session and feed both the unit tests and the acceptance suite."""

import numpy as np
import pytest

from qmemsim.numcore import PulseShape
from qmemsim.twolevel import PropagationConfig
from qmemsim import echoprotocols, slowlight

SIGNAL = PulseShape("gaussian", center=0.0, width=1.0, area=np.pi / 20)


@pytest.fixture(scope="session")
def pe_headline():
    """2PE at d=2 with the rephasing pulse 2x shorter, nz-doubling gated."""
    pi_pulse = PulseShape("gaussian", 0.0, 0.5, np.pi)
    return echoprotocols.run_2pe(PropagationConfig(d=2.0, nz=48), SIGNAL,
                                 pi_pulse, tau=8.0, convergence=True)


@pytest.fixture(scope="session")
def pe_curves():
    """2PE numeric efficiency over d for pulse-duration ratios 1, 2, 10."""
    out = {}
    for ratio in (1.0, 2.0, 10.0):
        pi_pulse = PulseShape("gaussian", 0.0, 1.0 / ratio, np.pi)
        for d in (0.5, 1.0, 2.0):
            out[(ratio, d)] = echoprotocols.run_2pe(
                PropagationConfig(d=d, nz=48), SIGNAL, pi_pulse, tau=9.0)
    return out


@pytest.fixture(scope="session")
def crib_forward_reports():
    return {d: echoprotocols.run_crib(PropagationConfig(d=d, nz=48), SIGNAL,
                                      tau=6.0, direction="forward")
            for d in (0.5, 1.0, 2.0, 4.0)}


@pytest.fixture(scope="session")
def crib_backward_d3():
    return echoprotocols.run_crib(PropagationConfig(d=3.0, nz=48), SIGNAL,
                                  tau=6.0, direction="backward")


@pytest.fixture(scope="session")
def rose_pi():
    """ROSE at d=2 with a pair of ratio-10 rephasing pulses."""
    pi10 = PulseShape("gaussian", 0.0, 0.1, np.pi)
    return echoprotocols.run_rose(PropagationConfig(d=2.0, nz=48), SIGNAL,
                                  (10.0, 25.0, pi10))


@pytest.fixture(scope="session")
def slow_reports():
    """The four stopped-light protocols with their canonical parameters."""
    scens = {
        "shome": slowlight.SlowLightScenario.shome(storage_event=5.0,
                                                   retrieval_event=60.0),
        "fid": slowlight.SlowLightScenario.fid(retrieval_event=0.8),
        "eit": slowlight.SlowLightScenario.eit(storage_event=5.0,
                                               retrieval_event=60.0),
        "raman": slowlight.SlowLightScenario.raman(retrieval_event=0.8),
    }
    return {name: slowlight.run_slowlight(s) for name, s in scens.items()}
