"""Success probabilities of emission-based protocols next to the reflection protocol."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolated, RegimeViolation
from .model import NodeParams
from .protocol import bell_amplitudes, detection_probability
from .pulse import GaussianPulse, PulseSpec, default_grid, spectrum_of

REGIME_RATIO = 0.1  # "much smaller than" threshold for the regime flags
MATCH_TOL = 0.05


def emission_probability(C: float, kappa: float, kappa1: float, gamma: float) -> float:
    """Probability that an excited emitter outcouples through the front mirror.

    P_em = kappa1/(kappa + gamma) * C/(C + 1), on resonance.
    """
    if C < 0 or kappa <= 0 or kappa1 <= 0 or gamma <= 0 or kappa1 > kappa * (1 + 1e-12):
        raise PreconditionViolated(f"invalid rates C={C}, kappa={kappa}, kappa1={kappa1}, gamma={gamma}")
    return kappa1 / (kappa + gamma) * C / (C + 1.0)


def barrett_kok_success(p_em: float, eta: float) -> float:
    """Two-round emission protocol success probability eta p_em^2 / 2."""
    _check_unit("p_em", p_em)
    _check_unit("eta", eta)
    return eta * p_em**2 / 2.0


def single_click_success(p_em: float, eta: float, theta_prep: float) -> float:
    """Single-click emission protocol success 2 sqrt(eta) sin^2(theta) p_em.

    Small preparation angles trade success probability for fidelity; the
    formula is only a probability for theta_prep << 1.

    Raises:
        RegimeViolation: If the formula exceeds 1.
    """
    _check_unit("p_em", p_em)
    _check_unit("eta", eta)
    if not 0 <= theta_prep <= math.pi / 2:
        raise PreconditionViolated(f"theta_prep must lie in [0, pi/2], got {theta_prep}")
    p = 2.0 * math.sqrt(eta) * math.sin(theta_prep) ** 2 * p_em
    if p > 1.0:
        raise RegimeViolation(f"single-click formula gives {p:.4g} > 1 at theta_prep={theta_prep}; valid for theta_prep << 1")
    return p


def _check_unit(name: str, value: float) -> None:
    if not 0 <= value <= 1:
        raise PreconditionViolated(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ComparisonReport:
    """Emission and reflection protocol probabilities for one node.

    Attributes:
        p_em: Single-emission outcoupling probability.
        p_barrett_kok: Two-round emission protocol success.
        p_single_click: Single-click emission protocol success (NaN if out of regime).
        p_reflection_single_port: Reflection protocol, one detector (port b).
        p_reflection_two_port: Reflection protocol, both detectors.
        emitter_narrow: gamma/kappa < 0.1.
        pulse_narrow: sigma_u/((C+1) gamma) < 0.1.
        matching_error: |eta p_em^2/2 - P_b|/P_b (NaN if P_b = 0).
    """

    p_em: float
    p_barrett_kok: float
    p_single_click: float
    p_reflection_single_port: float
    p_reflection_two_port: float
    emitter_narrow: bool
    pulse_narrow: bool
    matching_error: float

    @property
    def in_regime(self) -> bool:
        return self.emitter_narrow and self.pulse_narrow

    @property
    def matches(self) -> bool:
        """Barrett-Kok rate equals the single-port reflection rate within 5%."""
        return self.matching_error < MATCH_TOL


def _pulse_width(pulse: PulseSpec) -> float:
    if isinstance(pulse, GaussianPulse):
        return pulse.sigma_u
    s = pulse.spectrum
    p = np.abs(s.values) ** 2 * s.grid.weights
    var = float(np.sum(p * (s.omega - pulse.delta) ** 2))
    return math.sqrt(2 * var)


def compare_protocols(node: NodeParams, pulse: PulseSpec, eta: float, theta_prep: float = 0.1, grid=None) -> ComparisonReport:
    """Compare emission-based protocols with reflection off two copies of ``node``."""
    _check_unit("eta", eta)
    C = node.cooperativity(0)
    gamma = node.transitions[0].gamma
    p_em = emission_probability(C, node.kappa, node.kappa1, gamma)
    try:
        p_sc = single_click_success(p_em, eta, theta_prep)
    except RegimeViolation:
        p_sc = math.nan
    grid = default_grid(pulse, (node,)) if grid is None else grid
    amps = bell_amplitudes(node, node, spectrum_of(pulse, grid))
    p_b = detection_probability(amps, "b", eta)
    p_a = detection_probability(amps, "a", eta)
    p_bk = barrett_kok_success(p_em, eta)
    return ComparisonReport(
        p_em=p_em,
        p_barrett_kok=p_bk,
        p_single_click=p_sc,
        p_reflection_single_port=p_b,
        p_reflection_two_port=p_a + p_b,
        emitter_narrow=gamma / node.kappa < REGIME_RATIO,
        pulse_narrow=_pulse_width(pulse) / ((C + 1) * gamma) < REGIME_RATIO,
        matching_error=abs(p_bk - p_b) / p_b if p_b > 0 else math.nan,
    )
