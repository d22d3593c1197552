import math

import numpy as np
import pytest

from cqedlink import GaussianPulse, NodeDeviation, NodeParams, SetupParams, decompose_modes, default_grid, spectrum_of, transfer_pair
from cqedlink.errors import NoSignal, PreconditionViolated
from cqedlink.model import deviated_pair, random_node
from cqedlink.protocol import (
    TARGET_STATE,
    Encoding,
    bell_amplitudes,
    classify_encoding,
    detection_probability,
    fidelity_exact,
    fidelity_nv_perturbative,
    fidelity_taylor,
    phase_error_fidelity,
    run_protocol,
)

BELL = {
    "Phi-": np.array([1, 0, 0, -1]) / math.sqrt(2),
    "Psi-": np.array([0, 1, -1, 0]) / math.sqrt(2),
}


def density_oracle(nodeA, nodeB, pulse, port, eta=1.0):
    """Two-spin state after a click, built from the interferometer amplitudes.

    Spins start in |+>|+>; the photon is split 50/50, reflected with
    r_k^A and r_l^B and recombined so that port a sees (r_k^A + r_l^B)/2 and
    port b sees (r_k^A - r_l^B)/2.
    """
    grid = default_grid(pulse, (nodeA, nodeB))
    u = spectrum_of(pulse, grid)
    ta, tb = transfer_pair(nodeA, u.omega), transfer_pair(nodeB, u.omega)
    sign = 1 if port == "a" else -1
    amps = np.array([(ra + sign * rb) / 2 / 2 * u.values for ra in (ta.r0, ta.r1) for rb in (tb.r0, tb.r1)])
    rho = np.einsum("iw,jw,w->ij", amps, amps.conj(), grid.weights)
    p = eta * np.trace(rho).real
    psi = BELL[TARGET_STATE[port]]
    f = (psi.conj() @ rho @ psi).real / np.trace(rho).real
    return p, f


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("port", ["a", "b"])
def test_against_density_matrix(seed, port):
    rng = np.random.default_rng(seed)
    a, b = random_node(rng, seed % 2 == 1), random_node(rng, seed % 3 == 0)
    pulse = GaussianPulse(rng.uniform(0.05, 2.0), rng.uniform(-1, 1))
    eta = rng.uniform(0.1, 1.0)
    out = run_protocol(a, b, pulse, SetupParams(eta))
    p, f = density_oracle(a, b, pulse, port, eta)
    assert getattr(out, f"P_{port}") == pytest.approx(p, rel=1e-12)
    assert getattr(out, f"F_{port}") == pytest.approx(f, rel=1e-12)


def test_targets():
    assert TARGET_STATE["a"] == "Phi-" and TARGET_STATE["b"] == "Psi-"


def test_identical_nodes_herald_psi_minus_perfectly(rng):
    for _ in range(5):
        n = random_node(rng, bool(rng.integers(2)))
        out = run_protocol(n, n, GaussianPulse(rng.uniform(0.05, 3)))
        assert out.F_b == pytest.approx(1.0, abs=1e-12)


def test_eta_scales_probability_only(phase_node):
    p = GaussianPulse(0.3)
    full = run_protocol(phase_node, phase_node, p)
    half = run_protocol(phase_node, phase_node, p, SetupParams(0.5))
    assert half.P_a == pytest.approx(full.P_a / 2, rel=1e-14)
    assert half.F_a == pytest.approx(full.F_a, rel=1e-14)


def test_phase_encoding_narrow_pulse(phase_node):
    """r_+ = 0 and |r_-| = 1/2 at resonance: both ports click with eta |r_-|^2/2 and F = 1."""
    out = run_protocol(phase_node, phase_node, GaussianPulse(1e-3))
    assert out.P_a == pytest.approx(0.125, rel=1e-5)
    assert out.P_b == pytest.approx(0.125, rel=1e-5)
    assert out.F_a == pytest.approx(1.0, abs=1e-9)


def test_no_signal():
    bare = NodeParams.three_level(0.0, 2.0)
    out = run_protocol(bare, bare, GaussianPulse(0.5))
    # every photon leaves port a, carrying no which-state information
    assert out.P_a == pytest.approx(1.0) and out.F_a == 0.0
    assert out.P_b == 0.0 and math.isnan(out.F_b)
    p = GaussianPulse(0.5)
    amps = bell_amplitudes(bare, bare, spectrum_of(p, default_grid(p, (bare,))))
    with pytest.raises(NoSignal):
        fidelity_exact(amps, "b")
    with pytest.raises(ValueError):
        detection_probability(amps, "c")


@pytest.mark.parametrize("kappa", [5.0, 10.0])
def test_taylor_converges(phase_node, kappa):
    n = NodeParams.three_level(2.0, kappa, 0.75)
    errs = []
    for sigma in (0.08, 0.04, 0.02):
        p = GaussianPulse(sigma)
        errs.append(abs(fidelity_taylor(n, n, p, "a") - run_protocol(n, n, p).F_a))
    assert errs[-1] < 1e-6
    assert errs[0] / errs[2] > 12  # fourth-order remainder


def test_taylor_nearly_identical_variant():
    a, b = deviated_pair(2.0, 5.0, 3.75, 1.0, NodeDeviation(eps_C=0.02, eps_kappa=0.05))
    p = GaussianPulse(0.02)
    exact = run_protocol(a, b, p).F_b
    assert fidelity_taylor(a, b, p, "b", nearly_identical=True) == pytest.approx(exact, abs=1e-5)
    assert fidelity_taylor(a, b, p, "b") == pytest.approx(exact, abs=1e-7)


def test_perturbative_identical_port_a_width_term():
    """Identical nodes away from the flat kappa lose fidelity as 4 s^2/(C+1)^2 (1 - (C^2+2C+2)/(C kappa))^2."""
    C, kappa = 2.0, 10.0
    n = NodeParams.three_level(C, kappa, 0.75)
    for sigma in (0.01, 0.03):
        pert = fidelity_nv_perturbative(C, kappa, 0.75 * kappa, 1.0, NodeDeviation(), sigma, "a")
        assert pert == pytest.approx(1 - 4 * sigma**2 / 9 * (1 - 10 / 20) ** 2)
        assert pert == pytest.approx(run_protocol(n, n, GaussianPulse(sigma)).F_a, abs=5 * sigma**4)


def test_perturbative_port_a_needs_phase_ratio():
    with pytest.raises(PreconditionViolated):
        fidelity_nv_perturbative(2.0, 5.0, 5.0, 1.0, NodeDeviation(), 0.01, "a")
    assert fidelity_nv_perturbative(2.0, 5.0, 5.0, 1.0, NodeDeviation(), 0.01, "b") == 1.0


def test_perturbative_ignores_eps_gamma():
    base = fidelity_nv_perturbative(2.0, 5.0, 3.75, 1.0, NodeDeviation(eps_C=0.1), 0.01, "b")
    assert fidelity_nv_perturbative(2.0, 5.0, 3.75, 1.0, NodeDeviation(eps_C=0.1, eps_gamma=0.2), 0.01, "b") == base


@pytest.mark.parametrize("phi", [0.0, math.pi / 4, math.pi / 2, 2.0])
def test_phase_error_fidelity(phase_node, phi):
    p = GaussianPulse(1e-3)
    u = spectrum_of(p, default_grid(p, (phase_node,)))
    dec = decompose_modes(u, transfer_pair(phase_node, u.omega))
    assert phase_error_fidelity(phi, dec) == pytest.approx(math.cos(phi / 2) ** 2, abs=1e-9)


def test_phase_error_fidelity_generic():
    n = NodeParams.three_level(2.0, 5.0, 1.0)
    p = GaussianPulse(0.2)
    u = spectrum_of(p, default_grid(p, (n,)))
    dec = decompose_modes(u, transfer_pair(n, u.omega))
    f = phase_error_fidelity(0.3, dec)
    assert f < math.cos(0.15) ** 2
    am, ap = abs(dec.alpha_v0_minus) ** 2, abs(dec.alpha_v0_plus) ** 2 + abs(dec.alpha_v1_plus) ** 2
    assert f == pytest.approx(math.cos(0.15) ** 2 * am / (am + 2 * math.sin(0.15) ** 2 * ap))


def test_classify_encoding(phase_node):
    p = GaussianPulse(1e-3)
    u = spectrum_of(p, default_grid(p, (phase_node,)))
    assert classify_encoding(phase_node, u) is Encoding.PHASE
    intensity = NodeParams.three_level(10.0, 5.0, 0.5)
    assert classify_encoding(intensity, spectrum_of(p, default_grid(p, (intensity,)))) is Encoding.INTENSITY
    generic = NodeParams.three_level(2.0, 5.0, 1.0)
    assert classify_encoding(generic, spectrum_of(p, default_grid(p, (generic,)))) is Encoding.GENERIC
