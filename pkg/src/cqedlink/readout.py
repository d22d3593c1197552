"""Optical qubit readout: reflection-intensity contrast and interferometric phase readout."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolated
from .model import NodeParams
from .pulse import PulseSpec, default_grid, overlap_integral, spectrum_of
from .spectral import transfer_pair


@dataclass(frozen=True)
class ReadoutReport:
    """Readout figures of merit.

    Attributes:
        p_reflect_state0, p_reflect_state1: Pulse-averaged |r_k|^2.
        contrast: |p_reflect_state0 - p_reflect_state1|.
        port_probs: Phase readout only; port_probs[k][p] is the probability
            that qubit state k sends the photon to port p (0 = a, 1 = b).
        error: Phase readout only; 1 - min_k P(correct port | click, k).
    """

    p_reflect_state0: float
    p_reflect_state1: float
    contrast: float
    port_probs: np.ndarray | None = None
    error: float | None = None


def _reflectivities(params: NodeParams, pulse: PulseSpec, grid):
    grid = default_grid(pulse, (params,)) if grid is None else grid
    u = spectrum_of(pulse, grid)
    tr = transfer_pair(params, u.omega)
    return u, tr, [overlap_integral(u, np.abs(r) ** 2) for r in (tr.r0, tr.r1)]


def intensity_readout(params: NodeParams, pulse: PulseSpec, grid=None) -> ReadoutReport:
    """Reflection probability per qubit state and their contrast.

    Raises:
        PreconditionViolated: If the node is not three-level.
    """
    if not params.is_three_level:
        raise PreconditionViolated("intensity_readout needs a three-level node (g1 = 0)")
    _, _, (p0, p1) = _reflectivities(params, pulse, grid)
    return ReadoutReport(p0, p1, abs(p0 - p1))


def phase_readout(params: NodeParams, pulse: PulseSpec, reference: complex | None = None, grid=None) -> ReadoutReport:
    """Readout by interfering the reflected photon with a reference arm.

    The photon is split 50/50 between the node and a reference arm of
    amplitude transmission ``reference`` and recombined, so that qubit state
    k exits port a with amplitude (r_k + t) u~/2 and port b with
    (r_k - t) u~/2. State 0 should exit port a and state 1 port b.

    Args:
        params: Node parameters.
        pulse: Probe pulse.
        reference: Reference-arm amplitude t. Defaults to r_-(Delta), which
            balances the arms so that a perfect phase encoding is read out
            without error.
        grid: Quadrature grid.
    """
    u, tr, (p0, p1) = _reflectivities(params, pulse, grid)
    if reference is None:
        reference = complex(transfer_pair(params, pulse.delta).r_minus)
    probs = np.empty((2, 2))
    for k, r in enumerate((tr.r0, tr.r1)):
        probs[k, 0] = overlap_integral(u, np.abs(r + reference) ** 2 / 4)
        probs[k, 1] = overlap_integral(u, np.abs(r - reference) ** 2 / 4)
    with np.errstate(invalid="ignore", divide="ignore"):
        correct = np.array([probs[0, 0], probs[1, 1]]) / probs.sum(axis=1)
    error = float(1.0 - np.min(correct)) if np.all(np.isfinite(correct)) else 0.5
    return ReadoutReport(p0, p1, abs(p0 - p1), probs, error)
