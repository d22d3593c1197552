"""Observables of the heralded Mach-Zehnder entanglement protocol.

Two nodes A and B each reflect one arm of a single photon. With
r_s^{+/-} = (r_s^A +/- r_s^B)/2 for s in {+, -}, the photonic amplitude
functions multiplying the Bell components are:

=========  ===========  ===========
state      port a       port b
=========  ===========  ===========
Phi+ Psi+  r_+^+ u~     r_+^- u~
Phi-       r_-^+ u~     r_-^- u~
Psi-       r_-^- u~     r_-^+ u~
=========  ===========  ===========

A click in port a heralds Phi-, a click in port b heralds Psi-.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType

import numpy as np

from .errors import NoSignal, PreconditionViolated
from .model import NodeDeviation, NodeParams, SetupParams, deviated_pair, validate_node
from .pulse import GaussianPulse, ModeDecomposition, PulseSpec, Spectrum, default_grid, spectrum_of
from .spectral import default_step, second_derivative, transfer_pair

PORTS = ("a", "b")
TARGET_STATE = MappingProxyType({"a": "Phi-", "b": "Psi-"})
NO_SIGNAL_BELOW = 1e-15


def _check_port(port: str) -> str:
    if port not in PORTS:
        raise ValueError(f"port must be 'a' or 'b', got {port!r}")
    return port


@dataclass(frozen=True)
class BellChannelAmplitudes:
    """The six photonic amplitude spectra of the pre-detection state.

    Attributes:
        sym_a, sym_b: Amplitude of (Phi+ + Psi+) in port a / b.
        phi_minus_a, phi_minus_b: Amplitude of Phi- in port a / b.
        psi_minus_a, psi_minus_b: Amplitude of Psi- in port a / b.
        u: Input spectrum the amplitudes were built from.
    """

    sym_a: Spectrum
    sym_b: Spectrum
    phi_minus_a: Spectrum
    phi_minus_b: Spectrum
    psi_minus_a: Spectrum
    psi_minus_b: Spectrum
    u: Spectrum

    def port(self, port: str) -> tuple[Spectrum, Spectrum, Spectrum]:
        """(target, other antisymmetric, symmetric) amplitudes of a port."""
        if _check_port(port) == "a":
            return self.phi_minus_a, self.psi_minus_a, self.sym_a
        return self.psi_minus_b, self.phi_minus_b, self.sym_b

    def node_factor(self, port: str) -> np.ndarray:
        """R_p(omega) = |r_-^+|^2 + |r_-^-|^2 + 2|r_+^{+/-}|^2 on the grid."""
        target, other, sym = self.port(port)
        u2 = np.abs(self.u.values) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            num = np.abs(target.values) ** 2 + np.abs(other.values) ** 2 + 2 * np.abs(sym.values) ** 2
            return np.where(u2 > 0, num / np.where(u2 > 0, u2, 1.0), 0.0)


def _combined(nodeA: NodeParams, nodeB: NodeParams, omega):
    ta = transfer_pair(nodeA, omega)
    tb = transfer_pair(nodeB, omega)
    return (
        0.5 * (ta.r_plus + tb.r_plus),
        0.5 * (ta.r_plus - tb.r_plus),
        0.5 * (ta.r_minus + tb.r_minus),
        0.5 * (ta.r_minus - tb.r_minus),
    )


def bell_amplitudes(nodeA: NodeParams, nodeB: NodeParams, u: Spectrum) -> BellChannelAmplitudes:
    """Build the six Bell-by-port amplitude spectra for a node pair."""
    validate_node(nodeA)
    validate_node(nodeB)
    pp, pm, mp, mm = _combined(nodeA, nodeB, u.omega)
    s = lambda r: u.with_values(r * u.values)  # noqa: E731
    return BellChannelAmplitudes(
        sym_a=s(pp),
        sym_b=s(pm),
        phi_minus_a=s(mp),
        phi_minus_b=s(mm),
        psi_minus_a=s(mm),
        psi_minus_b=s(mp),
        u=u,
    )


def detection_probability(amps: BellChannelAmplitudes, port: str, eta: float = 1.0) -> float:
    """Probability of a click in ``port``: (eta/2) int R_p |u~|^2 d omega."""
    target, other, sym = amps.port(port)
    total = target.norm() ** 2 + other.norm() ** 2 + 2 * sym.norm() ** 2
    return 0.5 * eta * total


def fidelity_exact(amps: BellChannelAmplitudes, port: str) -> float:
    """Heralded fidelity with the port's target Bell state.

    Raises:
        NoSignal: If the click probability is below 1e-15.
    """
    target, other, sym = amps.port(port)
    denom = target.norm() ** 2 + other.norm() ** 2 + 2 * sym.norm() ** 2
    if 0.5 * denom < NO_SIGNAL_BELOW:
        raise NoSignal(f"click probability in port {port} is {0.5 * denom:.3g}")
    return target.norm() ** 2 / denom


@dataclass(frozen=True)
class ProtocolOutcome:
    """Per-port click probabilities and heralded fidelities.

    Attributes:
        P_a, P_b: Click probabilities including eta.
        F_a, F_b: Fidelities with the target states in ``targets``.
        R_a, R_b: Node factors R_p(omega) on the quadrature grid.
        targets: Bell state heralded by each port.
        amplitudes: The six amplitude spectra.
    """

    P_a: float
    P_b: float
    F_a: float
    F_b: float
    R_a: np.ndarray
    R_b: np.ndarray
    amplitudes: BellChannelAmplitudes
    targets: MappingProxyType = TARGET_STATE


def run_protocol(
    nodeA: NodeParams,
    nodeB: NodeParams,
    pulse: PulseSpec,
    setup: SetupParams = SetupParams(),
    grid=None,
) -> ProtocolOutcome:
    """Evaluate both ports for one node pair and pulse.

    Fidelities of a port without signal are reported as NaN.
    """
    grid = default_grid(pulse, (nodeA, nodeB)) if grid is None else grid
    amps = bell_amplitudes(nodeA, nodeB, spectrum_of(pulse, grid))

    def fid(port):
        try:
            return fidelity_exact(amps, port)
        except NoSignal:
            return math.nan

    return ProtocolOutcome(
        P_a=detection_probability(amps, "a", setup.eta),
        P_b=detection_probability(amps, "b", setup.eta),
        F_a=fid("a"),
        F_b=fid("b"),
        R_a=amps.node_factor("a"),
        R_b=amps.node_factor("b"),
        amplitudes=amps,
    )


def fidelity_taylor(
    nodeA: NodeParams,
    nodeB: NodeParams,
    pulse: GaussianPulse,
    port: str,
    nearly_identical: bool = False,
    h: float | None = None,
) -> float:
    """Fidelity to second order in the pulse width.

    Uses int f |u~|^2 ~ f(Delta) + sigma_u^2 f''(Delta)/4 for numerator and
    denominator and expands the ratio,

        F ~ (T + s T'')/R - T s R''/R^2,  s = sigma_u^2/4,

    with T = |r_-^+|^2 and R = T + B the port's node factor. With
    ``nearly_identical`` the expansion is also taken to first order in B/T,

        F ~ 1 - (B + s B'')/T + s T'' B/T^2,

    with B = |r_-^-|^2 + 2|r_+^{+/-}|^2.

    Second derivatives are central finite differences at Delta.
    """
    if not isinstance(pulse, GaussianPulse):
        raise PreconditionViolated("fidelity_taylor needs a Gaussian pulse")
    _check_port(port)
    sym_idx = 0 if port == "a" else 1

    def parts(w):
        pp, pm, mp, mm = _combined(nodeA, nodeB, w)
        sym = (pp, pm)[sym_idx]
        return np.abs(mp) ** 2, np.abs(mm) ** 2 + 2 * np.abs(sym) ** 2

    x = pulse.delta
    h = default_step(x) if h is None else h
    s = pulse.sigma_u**2 / 4.0
    T0, B0 = (float(v) for v in parts(np.array(x)))
    T2 = second_derivative(lambda w: parts(w)[0], x, h)
    B2 = second_derivative(lambda w: parts(w)[1], x, h)
    if nearly_identical:
        return 1.0 - (B0 + s * B2) / T0 + s * T2 * B0 / T0**2
    R0, R2 = T0 + B0, T2 + B2
    return (T0 + s * T2) / R0 - T0 * s * R2 / R0**2


def fidelity_nv_perturbative(
    C: float,
    kappa: float,
    kappa1: float,
    gamma: float,
    dev: NodeDeviation,
    sigma_u: float,
    port: str,
) -> float:
    """Second-order perturbative fidelity for slightly different three-level nodes.

    Evaluated on resonance. With q = eps_kappa/kappa - eps_kappa1 c/kappa1
    (c = 1 for port b; for port a the phase-encoding ratio is substituted so
    that eps_kappa1 c/kappa1 becomes eps_kappa1 (C+2)/(kappa (C+1))),

        F_b = 1 - 3 (dA - dB)^2 / (gamma^2 (C+1)^2)
                - 3 eC^2 / (4 C^2 (C+1)^2)
                - eC (C+4) q / (2 C^2 (C+1))
                - (3C^2 + 8C + 8) q^2 / (4 C^2)

    and F_a has the same eC and q terms plus

        - 4 sigma_u^2/(C+1)^2 (1/gamma - (C^2+2C+2)/(C kappa))^2
        - (3 (dA - dB)^2 + 8 dA dB) / (gamma^2 (C+1)^2).

    eps_gamma does not enter.

    Raises:
        PreconditionViolated: For port a off the phase-encoding ratio.
    """
    _check_port(port)
    if C <= 0:
        raise PreconditionViolated(f"C must be > 0, got {C}")
    eC, ek, ek1 = dev.eps_C, dev.eps_kappa, dev.eps_kappa1
    dA, dB = dev.delta_A, dev.delta_B
    g2 = gamma * gamma
    common = -3 * eC**2 / (4 * C * C * (C + 1) ** 2)
    if port == "b":
        q = ek / kappa - ek1 / kappa1
        return (
            1.0
            - 3 * (dA - dB) ** 2 / (g2 * (C + 1) ** 2)
            + common
            - eC * (C + 4) / (2 * C * C * (C + 1)) * q
            - (3 * C * C + 8 * C + 8) / (4 * C * C) * q * q
        )
    ratio = (C + 1) / (C + 2)
    if abs(kappa1 / kappa - ratio) > 1e-9:
        raise PreconditionViolated(f"port a needs kappa1/kappa = (C+1)/(C+2) = {ratio:.12g}, got {kappa1 / kappa:.12g}")
    q = ek / kappa - ek1 * (C + 2) / (kappa * (C + 1))
    width = 1.0 / gamma - (C * C + 2 * C + 2) / (C * kappa)
    return (
        1.0
        - 4 * sigma_u**2 / (C + 1) ** 2 * width**2
        - (3 * (dA - dB) ** 2 + 8 * dA * dB) / (g2 * (C + 1) ** 2)
        + common
        - eC * (C + 4) / (2 * C * C * (C + 1)) * q
        - (3 * C * C + 8 * C + 8) / (4 * C * C) * q * q
    )


def phase_error_fidelity(phi: float, decomposition: ModeDecomposition) -> float:
    """Fidelity of identical nodes with an interferometer phase error phi.

    F = cos^2(phi/2) |a0-|^2 / (|a0-|^2 + 2 sin^2(phi/2) (|a0+|^2 + |a1+|^2)).
    """
    am = abs(decomposition.alpha_v0_minus) ** 2
    ap = abs(decomposition.alpha_v0_plus) ** 2 + abs(decomposition.alpha_v1_plus) ** 2
    c2, s2 = math.cos(phi / 2) ** 2, math.sin(phi / 2) ** 2
    return c2 * am / (am + 2 * s2 * ap)


class Encoding(str, Enum):
    PHASE = "Phase"
    INTENSITY = "Intensity"
    GENERIC = "Generic"


SUPPORT_FRACTION = 1e-6


def classify_encoding(nodeA: NodeParams, u: Spectrum, tol: float = 1e-3) -> Encoding:
    """Classify a node's conditional reflection over the pulse support.

    Phase if max |r_+|^2 < tol, else Intensity if max |r_1|^2 < tol, else
    Generic. The support is where |u~|^2 exceeds 1e-6 of its peak.
    """
    u2 = np.abs(u.values) ** 2
    support = u2 > SUPPORT_FRACTION * u2.max()
    tr = transfer_pair(nodeA, u.omega[support])
    if np.max(np.abs(tr.r_plus) ** 2) < tol:
        return Encoding.PHASE
    if np.max(np.abs(tr.r1) ** 2) < tol:
        return Encoding.INTENSITY
    return Encoding.GENERIC


def nv_deviation_outcome(
    C: float,
    kappa: float,
    kappa1: float,
    gamma: float,
    dev: NodeDeviation,
    pulse: PulseSpec,
    setup: SetupParams = SetupParams(),
    grid=None,
) -> ProtocolOutcome:
    """Exact protocol outcome for a reference node and its deviated twin."""
    a, b = deviated_pair(C, kappa, kappa1, gamma, dev)
    return run_protocol(a, b, pulse, setup, grid)
