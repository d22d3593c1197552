"""Closed-form reflection transfer functions and their second derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PreconditionViolated, StepTooSmall
from .model import NodeParams, validate_node

WHICH = ("r_minus", "r_plus", "r0", "r1")


@dataclass(frozen=True)
class TransferEval:
    """Reflection amplitudes of one node at one or more probe frequencies.

    Attributes:
        omega: Probe detuning from the cavity resonance.
        r0, r1: Reflection amplitude with the qubit in state 0 or 1.
        r_plus, r_minus: (r0 + r1)/2 and (r0 - r1)/2.
    """

    omega: np.ndarray
    r0: np.ndarray
    r1: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray

    def get(self, which: str) -> np.ndarray:
        if which not in WHICH:
            raise ValueError(f"which must be one of {WHICH}, got {which!r}")
        return getattr(self, which)


def reflection(params: NodeParams, k: int, omega):
    """Reflection amplitude r_k(omega) of a node with the qubit in state k.

    r_k = 1 - 2 (kappa1/kappa) a / (a b + C_k) with
    a = 1 - 2i(omega - delta_k)/gamma_k and b = 1 - 2i omega/kappa.

    Args:
        params: Node parameters.
        k: Qubit state / transition index (0 or 1).
        omega: Probe detuning, scalar or array.

    Returns:
        Complex amplitude(s) with the shape of ``omega``.
    """
    t = params.transitions[k]
    kappa = params.kappa
    w = np.asarray(omega, dtype=float)
    a = 1.0 - 2j * (w - t.delta) / t.gamma
    b = 1.0 - 2j * w / kappa
    r = 1.0 - 2.0 * (params.kappa1 / kappa) * a / (a * b + params.cooperativity(k))
    return r if r.ndim else complex(r)


def transfer_pair(params: NodeParams, omega) -> TransferEval:
    """Both reflection amplitudes and their symmetric/antisymmetric parts."""
    validate_node(params)
    w = np.asarray(omega, dtype=float)
    r0 = np.asarray(reflection(params, 0, w))
    r1 = np.asarray(reflection(params, 1, w))
    return TransferEval(w, r0, r1, 0.5 * (r0 + r1), 0.5 * (r0 - r1))


def resonant_peak(params: NodeParams) -> float:
    """Peak |r_-(0)|^2 = (kappa1/kappa)^2 C^2/(C+1)^2 of a resonant three-level node.

    Raises:
        PreconditionViolated: If the node is not three-level or not resonant.
    """
    if not params.is_three_level:
        raise PreconditionViolated("resonant_peak needs g1 = 0 (three-level node)")
    if params.transitions[0].delta != 0.0:
        raise PreconditionViolated("resonant_peak needs delta0 = 0")
    C = params.cooperativity(0)
    return params.coupling_ratio**2 * C**2 / (C + 1.0) ** 2


def default_step(omega: float, scale: float = 1.0) -> float:
    """Default finite-difference step 1e-4 * max(scale, |omega| + scale)."""
    return 1e-4 * max(scale, abs(omega) + scale)


def _check_step(h: float, omega: float) -> None:
    floor = 64.0 * np.finfo(float).eps * max(1.0, abs(omega))
    if not h > floor:
        raise StepTooSmall(f"step {h!r} below round-off floor {floor:.3g}")


def second_derivative(f: Callable[[np.ndarray], np.ndarray], x: float, h: float, order: int = 2) -> float:
    """Central finite-difference second derivative of a real function.

    Args:
        f: Vectorized real function.
        x: Evaluation point.
        h: Step size.
        order: Truncation order, 2 (3-point) or 4 (5-point stencil).
    """
    _check_step(h, x)
    if order == 2:
        fm, f0, fp = f(np.array([x - h, x, x + h]))
        return float((fp - 2.0 * f0 + fm) / h**2)
    if order == 4:
        f2m, fm, f0, fp, f2p = f(np.array([x - 2 * h, x - h, x, x + h, x + 2 * h]))
        return float((-f2p + 16.0 * fp - 30.0 * f0 + 16.0 * fm - f2m) / (12.0 * h**2))
    raise ValueError(f"order must be 2 or 4, got {order}")


def d2_modsq(params: NodeParams, which: str = "r_minus", omega: float = 0.0, h: float | None = None, order: int = 2) -> float:
    """Finite-difference estimate of d^2|r|^2/d omega^2.

    Args:
        params: Node parameters.
        which: One of ``r_minus``, ``r_plus``, ``r0``, ``r1``.
        omega: Evaluation frequency.
        h: Step; defaults to :func:`default_step`.
        order: 2 for the 3-point stencil, 4 for the 5-point stencil.

    Raises:
        StepTooSmall: If ``h`` is below 64 machine epsilons times max(1, |omega|).
    """
    if which not in WHICH:
        raise ValueError(f"which must be one of {WHICH}, got {which!r}")
    h = default_step(omega) if h is None else float(h)
    return second_derivative(lambda w: np.abs(transfer_pair(params, w).get(which)) ** 2, omega, h, order)
