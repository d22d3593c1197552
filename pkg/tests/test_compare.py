import math

import pytest

from cqedlink import GaussianPulse, NodeParams
from cqedlink.compare import barrett_kok_success, compare_protocols, emission_probability, single_click_success
from cqedlink.errors import PreconditionViolated, RegimeViolation


def test_emission_probability():
    assert emission_probability(2.0, 100.0, 100.0, 1.0) == pytest.approx(100 / 101 * 2 / 3)
    assert emission_probability(0.0, 1.0, 1.0, 1.0) == 0.0
    with pytest.raises(PreconditionViolated):
        emission_probability(1.0, 1.0, 2.0, 1.0)


def test_success_formulas():
    assert barrett_kok_success(0.5, 0.8) == pytest.approx(0.1)
    assert single_click_success(0.5, 1.0, 0.1) == pytest.approx(2 * math.sin(0.1) ** 2 * 0.5)
    with pytest.raises(RegimeViolation):
        single_click_success(1.0, 1.0, math.pi / 2)
    with pytest.raises(PreconditionViolated):
        single_click_success(0.5, 1.0, 2.0)
    with pytest.raises(PreconditionViolated):
        barrett_kok_success(1.5, 1.0)


def test_bad_cavity_comparison():
    node = NodeParams.three_level(2.0, 100.0, 1.0)
    rep = compare_protocols(node, GaussianPulse(0.01), 1.0)
    assert rep.in_regime
    assert rep.matches
    assert rep.matching_error < 0.05
    # with kappa1 = kappa port a also fires without heralding, so both ports count
    assert rep.p_reflection_two_port > rep.p_reflection_single_port


def test_regime_flags():
    node = NodeParams.three_level(2.0, 5.0, 1.0)
    rep = compare_protocols(node, GaussianPulse(1.0), 0.5)
    assert not rep.emitter_narrow and not rep.pulse_narrow and not rep.in_regime


def test_zero_eta_and_out_of_regime_single_click():
    node = NodeParams.three_level(2.0, 100.0, 1.0)
    rep = compare_protocols(node, GaussianPulse(0.01), 0.0, theta_prep=0.1)
    assert rep.p_barrett_kok == 0.0 and rep.p_reflection_single_port == 0.0
    assert math.isnan(rep.matching_error)
    strong = NodeParams.three_level(50.0, 100.0, 1.0)
    rep = compare_protocols(strong, GaussianPulse(0.01), 1.0, theta_prep=math.pi / 2)
    assert math.isnan(rep.p_single_click)
