"""Photon pulses, spectral quadrature and output temporal-mode decomposition.

Spectra live on uniform frequency grids; integrals use the trapezoidal rule.
The Fourier convention is f~(omega) = (2 pi)^(-1/2) int exp(i omega t) f(t) dt.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.special import erfc

from .errors import DegenerateAntisymmetric, GridMismatch, GridTooNarrow, NonPhysicalParameter, NotNormalized
from .model import NodeParams
from .spectral import TransferEval

MIN_POINTS = 2**10
DEFAULT_POINTS = 2**12
MAX_POINTS = 2**20
GAUSSIAN_HALF_WIDTH = 8.0  # grid must cover center +- 8 sigma
NORM_TOL = 1e-9
V1_ABSENT_BELOW = 1e-12


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid with ``n`` points from ``start`` to ``stop``."""

    start: float
    stop: float
    n: int

    def __post_init__(self):
        if self.n < MIN_POINTS:
            raise GridTooNarrow(f"grid needs at least {MIN_POINTS} points, got {self.n}")
        if not self.stop > self.start:
            raise GridTooNarrow(f"empty grid [{self.start}, {self.stop}]")

    @property
    def omega(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n)

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / (self.n - 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        """Same span with the spacing divided by ``factor``."""
        return FrequencyGrid(self.start, self.stop, factor * (self.n - 1) + 1)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex samples on a frequency grid with the L2 inner product."""

    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n,):
            raise GridMismatch(f"values shape {values.shape} does not match grid size {self.grid.n}")
        object.__setattr__(self, "values", values)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    def _check(self, other: "Spectrum") -> None:
        if other.grid != self.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")

    def inner(self, other: "Spectrum") -> complex:
        """<self, other> = int conj(self) other d omega."""
        self._check(other)
        return complex(np.sum(self.grid.weights * np.conj(self.values) * other.values))

    def norm(self) -> float:
        return math.sqrt(float(np.sum(self.grid.weights * np.abs(self.values) ** 2)))

    def with_values(self, values) -> "Spectrum":
        return Spectrum(self.grid, values)

    def __mul__(self, factor):
        return self.with_values(self.values * factor)

    __rmul__ = __mul__

    def __add__(self, other: "Spectrum") -> "Spectrum":
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Spectrum") -> "Spectrum":
        self._check(other)
        return self.with_values(self.values - other.values)


@dataclass(frozen=True)
class GaussianPulse:
    """Gaussian single-photon pulse.

    Attributes:
        sigma_u: Spectral width (standard deviation of |u~|^2 times sqrt 2).
        delta: Center detuning from the cavity resonance.
    """

    sigma_u: float
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma_u) and self.sigma_u > 0):
            raise NonPhysicalParameter("sigma_u", f"must be > 0, got {self.sigma_u}")
        if not math.isfinite(self.delta):
            raise NonPhysicalParameter("delta", "must be finite")

    def amplitude(self, omega):
        """u~(omega) = (pi sigma^2)^(-1/4) exp(-(omega - delta)^2 / (2 sigma^2))."""
        s = self.sigma_u
        return (math.pi * s * s) ** -0.25 * np.exp(-((np.asarray(omega) - self.delta) ** 2) / (2 * s * s))

    def temporal(self, t):
        """Time-domain envelope u(t), centered at t = 0."""
        s = self.sigma_u
        t = np.asarray(t, dtype=float)
        return (math.pi * s * s) ** -0.25 * s * np.exp(-1j * self.delta * t - 0.5 * (s * t) ** 2)

    def tail_norm(self, t):
        """int_t^inf |u|^2 dt'."""
        return 0.5 * erfc(self.sigma_u * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SampledPulse:
    """Pulse given by a normalized sampled spectrum."""

    spectrum: Spectrum

    def __post_init__(self):
        norm2 = self.spectrum.norm() ** 2
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NotNormalized(f"sampled spectrum has squared norm {norm2:.12g}, expected 1")

    @property
    def delta(self) -> float:
        """Intensity-weighted mean frequency."""
        s = self.spectrum
        return float(np.sum(s.grid.weights * s.omega * np.abs(s.values) ** 2))


PulseSpec = Union[GaussianPulse, SampledPulse]


def feature_width(nodes: Sequence[NodeParams]) -> float:
    """Narrowest linewidth among the nodes' cavity and transitions."""
    widths = [1.0]
    for node in nodes:
        widths.append(node.kappa)
        widths.extend(t.gamma for t in node.transitions)
    return min(widths)


def default_grid(pulse: PulseSpec, nodes: Sequence[NodeParams] = (), n: int | None = None) -> FrequencyGrid:
    """Grid covering the pulse and the nodes' Purcell-broadened features.

    The span is delta +- (8 sigma_u + W) with W = 5 max_k (C_k + 1) gamma_k.
    Unless ``n`` is given, the point count is the smallest power of two
    (at least 2^12, at most 2^20) whose spacing resolves both sigma_u and
    the narrowest node linewidth with 8 points; if 2^20 points do not
    suffice, W is reduced (down to zero) until they do.
    """
    if isinstance(pulse, SampledPulse):
        return pulse.spectrum.grid
    W = 5.0
    for node in nodes:
        for k, t in enumerate(node.transitions):
            W = max(W, 5.0 * (node.cooperativity(k) + 1.0) * t.gamma)
    half = GAUSSIAN_HALF_WIDTH * pulse.sigma_u + W
    if n is None:
        h_max = min(pulse.sigma_u, feature_width(nodes)) / 8.0
        # the integrands carry |u~|^2, so the node margin is dropped first when points run out
        half = max(GAUSSIAN_HALF_WIDTH * pulse.sigma_u, min(half, h_max * (MAX_POINTS - 1) / 2))
        n = DEFAULT_POINTS
        while 2 * half / (n - 1) > h_max and n < MAX_POINTS:
            n *= 2
    return FrequencyGrid(pulse.delta - half, pulse.delta + half, int(n))


def spectrum_of(pulse: PulseSpec, grid: FrequencyGrid | None = None) -> Spectrum:
    """Sample a pulse spectrum on a grid.

    Raises:
        GridTooNarrow: If a Gaussian is not covered to +- 8 sigma_u or is
            under-resolved.
    """
    if isinstance(pulse, SampledPulse):
        src = pulse.spectrum
        if grid is None or grid == src.grid:
            return src
        w = grid.omega
        vals = np.interp(w, src.omega, src.values.real, 0.0, 0.0) + 1j * np.interp(w, src.omega, src.values.imag, 0.0, 0.0)
        return Spectrum(grid, vals)
    grid = default_grid(pulse) if grid is None else grid
    lo = pulse.delta - GAUSSIAN_HALF_WIDTH * pulse.sigma_u
    hi = pulse.delta + GAUSSIAN_HALF_WIDTH * pulse.sigma_u
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    if grid.start > lo + slack or grid.stop < hi - slack:
        raise GridTooNarrow(f"grid [{grid.start}, {grid.stop}] does not cover [{lo}, {hi}]")
    if grid.spacing > pulse.sigma_u / 2:
        raise GridTooNarrow(f"spacing {grid.spacing:.3g} does not resolve sigma_u={pulse.sigma_u}")
    return Spectrum(grid, pulse.amplitude(grid.omega))


def overlap_integral(f: Spectrum, weight) -> float:
    """Trapezoidal integral of weight(omega) |f(omega)|^2.

    Args:
        f: Spectrum.
        weight: Real samples on the same grid (array or Spectrum-like).

    Raises:
        GridMismatch: If ``weight`` does not match the grid.
    """
    wt = weight.values.real if isinstance(weight, Spectrum) else np.asarray(weight, dtype=float)
    if isinstance(weight, Spectrum) and weight.grid != f.grid:
        raise GridMismatch(f"{f.grid} vs {weight.grid}")
    if wt.ndim == 0:
        wt = np.full(f.grid.n, float(wt))
    if wt.shape != (f.grid.n,):
        raise GridMismatch(f"weight shape {wt.shape} vs grid size {f.grid.n}")
    return float(np.sum(f.grid.weights * wt * np.abs(f.values) ** 2))


@dataclass(frozen=True)
class ModeDecomposition:
    """Output of a Gram-Schmidt decomposition into two orthonormal modes.

    r_- u~ = alpha_v0_minus v0 and r_+ u~ = alpha_v0_plus v0 + alpha_v1_plus v1.

    Attributes:
        alpha_v0_minus: Real, non-negative (fixes the global phase of v0).
        alpha_v0_plus: Projection of r_+ u~ on v0.
        alpha_v1_plus: Real, non-negative norm of the residual.
        v0: First output mode.
        v1: Second output mode, or None when alpha_v1_plus < 1e-12.
    """

    alpha_v0_minus: complex
    alpha_v0_plus: complex
    alpha_v1_plus: complex
    v0: Spectrum
    v1: Spectrum | None

    @property
    def v1_present(self) -> bool:
        return self.v1 is not None

    def branch_amplitudes(self) -> np.ndarray:
        """Amplitudes alpha^k_{v_l} for an input split 1/sqrt(2) per branch.

        Returns:
            Array [k, l]; branch k=0 reflects with r_+ + r_-, k=1 with r_+ - r_-.
        """
        s = 1.0 / math.sqrt(2.0)
        return s * np.array(
            [
                [self.alpha_v0_plus + self.alpha_v0_minus, self.alpha_v1_plus],
                [self.alpha_v0_plus - self.alpha_v0_minus, self.alpha_v1_plus],
            ],
            dtype=complex,
        )


def _check_transfer_grid(u: Spectrum, transfer: TransferEval) -> None:
    w = np.asarray(transfer.omega)
    if w.shape != (u.grid.n,) or not np.allclose(w, u.omega, rtol=0, atol=1e-12 * max(1.0, np.abs(w).max())):
        raise GridMismatch("transfer functions were not evaluated on the spectrum's grid")


def decompose_modes(u: Spectrum, transfer: TransferEval) -> ModeDecomposition:
    """Split the reflected pulse into orthonormal output modes.

    Args:
        u: Normalized input spectrum.
        transfer: Transfer functions evaluated on ``u``'s grid.

    Raises:
        DegenerateAntisymmetric: If ||r_- u~|| < 1e-12.
        GridMismatch: If ``transfer`` was evaluated on another grid.
    """
    _check_transfer_grid(u, transfer)
    minus = u.with_values(transfer.r_minus * u.values)
    plus = u.with_values(transfer.r_plus * u.values)
    a0m = minus.norm()
    if a0m < 1e-12:
        raise DegenerateAntisymmetric(f"||r_- u|| = {a0m:.3g}; antisymmetric mode undefined")
    v0 = minus * (1.0 / a0m)
    a0p = v0.inner(plus)
    residual = plus - v0 * a0p
    a1p = residual.norm()
    v1 = residual * (1.0 / a1p) if a1p >= V1_ABSENT_BELOW else None
    return ModeDecomposition(complex(a0m), complex(a0p), complex(a1p if v1 is not None else 0.0), v0, v1)


def read_spectrum_csv(path: str | Path, normalized: bool = True) -> Spectrum:
    """Load a spectrum from a CSV with header ``omega,re,im``.

    Args:
        path: File path.
        normalized: Require unit norm (raises NotNormalized otherwise).

    Raises:
        GridMismatch: If the frequency column is not a uniform grid.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    header = [c.strip() for c in rows[0]]
    if header != ["omega", "re", "im"]:
        raise ValueError(f"expected header omega,re,im, got {','.join(header)}")
    data = np.array(rows[1:], dtype=float)
    w = data[:, 0]
    grid = FrequencyGrid(float(w[0]), float(w[-1]), len(w))
    if not np.allclose(w, grid.omega, rtol=0, atol=1e-9 * max(1.0, np.abs(w).max())):
        raise GridMismatch("frequency column is not a uniform grid")
    spec = Spectrum(grid, data[:, 1] + 1j * data[:, 2])
    if normalized:
        SampledPulse(spec)
    return spec


def write_spectrum_csv(path: str | Path, spectrum: Spectrum) -> None:
    """Write a spectrum as ``omega,re,im`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("omega,re,im\n")
        for w, v in zip(spectrum.omega, spectrum.values):
            fh.write(f"{w:.17g},{v.real:.17g},{v.imag:.17g}\n")
