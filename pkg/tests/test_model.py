import math

import numpy as np
import pytest

from cqedlink import (
    FourLevelConfig,
    NodeDeviation,
    NodeParams,
    NonPhysicalParameter,
    SetupParams,
    TransitionParams,
    deviated_pair,
    expand_four_level,
    validate_node,
)
from cqedlink.model import random_node


def test_three_level_recovers_cooperativity():
    n = NodeParams.three_level(2.0, 5.0, 0.75, gamma=1.5, delta=0.3)
    assert n.cooperativity(0) == pytest.approx(2.0, rel=1e-14)
    assert n.kappa == pytest.approx(5.0)
    assert n.kappa1 == pytest.approx(3.75)
    assert n.coupling_ratio == pytest.approx(0.75)
    assert n.is_three_level
    assert n.cooperativity(1) == 0
    assert n.transitions[0].delta == 0.3


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(kappa1=-1.0, kappa2=0.0), "kappa1"),
        (dict(kappa1=0.0, kappa2=1.0), "kappa1"),
        (dict(kappa1=1.0, kappa2=-0.1), "kappa2"),
        (dict(kappa1=math.nan, kappa2=0.0), "kappa1"),
    ],
)
def test_invalid_rates_name_the_field(kwargs, field):
    t = TransitionParams(1.0, 1.0)
    with pytest.raises(NonPhysicalParameter) as exc:
        NodeParams(transitions=(t, t), **kwargs)
    assert exc.value.field == field


def test_invalid_transition():
    with pytest.raises(NonPhysicalParameter) as exc:
        TransitionParams(1.0, 0.0)
    assert exc.value.field == "gamma"
    with pytest.raises(NonPhysicalParameter):
        TransitionParams(math.inf, 1.0)


def test_validate_node_passthrough():
    n = NodeParams.three_level(1.0, 2.0)
    assert validate_node(n) is n


def test_with_delta():
    n = NodeParams.three_level(1.0, 2.0).with_delta(0.5, -0.5)
    assert n.transitions[0].delta == 0.5
    assert n.transitions[1].delta == -0.5


def test_four_level_expansion():
    cfg = FourLevelConfig.from_cooperativity(4.0, 100.0, 10.0, delta=2.0, kappa1_ratio=0.9)
    n = expand_four_level(cfg)
    assert n.transitions[0].delta == pytest.approx(-3.0)
    assert n.transitions[1].delta == pytest.approx(7.0)
    assert n.cooperativities == pytest.approx((4.0, 4.0))
    assert n.coupling_ratio == pytest.approx(0.9)
    c2 = cfg.with_(delta=1.0, kappa1_ratio=1.0)
    assert c2.base.kappa == pytest.approx(100.0)
    assert c2.base.kappa2 == 0.0
    with pytest.raises(NonPhysicalParameter):
        FourLevelConfig.from_cooperativity(4.0, 100.0, -1.0)


def test_deviated_pair_applies_offsets():
    dev = NodeDeviation(eps_C=0.1, eps_kappa=0.2, eps_kappa1=0.1, delta_A=0.05, delta_B=-0.05)
    a, b = deviated_pair(2.0, 5.0, 3.75, 1.0, dev)
    assert a.cooperativity(0) == pytest.approx(2.0)
    assert a.transitions[0].delta == pytest.approx(0.05)
    assert b.cooperativity(0) == pytest.approx(2.1)
    assert b.kappa == pytest.approx(5.2)
    assert b.kappa1 == pytest.approx(3.85)
    assert b.transitions[0].delta == pytest.approx(-0.05)
    half = dev.scaled(0.5)
    assert half.eps_C == pytest.approx(0.05) and half.delta_B == pytest.approx(-0.025)


def test_setup_params():
    assert SetupParams().eta == 1.0
    for eta in (0.0, 1.5, -0.1):
        with pytest.raises(NonPhysicalParameter):
            SetupParams(eta)


def test_random_node_ranges(rng):
    for four in (False, True):
        for _ in range(50):
            n = random_node(rng, four)
            assert 0.5 <= n.cooperativity(0) <= 5 + 1e-9
            assert 2 <= n.kappa <= 20
            assert 0.55 <= n.coupling_ratio <= 1
            assert n.is_three_level != four
