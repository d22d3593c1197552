"""Single-excitation amplitude dynamics with virtual input and output cavities.

The input pulse u(t) is emitted by a virtual cavity with coupling
g_u = u*/sqrt(1 - int^t |u|^2). The reflected field is absorbed by two
cascaded virtual cavities matched to the orthonormal output modes v0 and v1
from :func:`cqedlink.pulse.decompose_modes`; the second one sees the field
left over by the first, whose shape is v1'(t). Losses through kappa2 and
spontaneous emission only remove norm.

Time-domain modes are obtained from their sampled spectra with a direct
trapezoidal inverse Fourier transform, f(t) = (2 pi)^(-1/2) int exp(-i omega t) f~ d omega.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp, trapezoid

from .errors import DegenerateAntisymmetric, ModesNotOrthogonal, NormViolation, PreconditionViolated, StepSizeUnderflow
from .model import NodeParams, validate_node
from .pulse import (
    FrequencyGrid,
    GaussianPulse,
    ModeDecomposition,
    PulseSpec,
    SampledPulse,
    Spectrum,
    decompose_modes,
    default_grid,
    spectrum_of,
)
from .spectral import transfer_pair

EPS_REG = 1e-10
GAUSSIAN_TRUNCATION = 6.0  # window starts 6 temporal widths before the pulse center
RING_DOWN = 20.0  # amplitude e-folds allowed after the pulse
MAX_RING_DOWN = 1000.0
NORM_STEP_TOL = 1e-9
SUPPORT_FLOOR = 1e-18
COMPONENTS = ("alpha_u", "alpha_c", "alpha_e", "alpha_v0", "alpha_v1")


class TemporalModes:
    """Several spectra on a common grid, evaluated in the time domain."""

    def __init__(self, spectra: list[Spectrum]):
        grid = spectra[0].grid
        vals = np.array([s.values for s in spectra])
        keep = np.max(np.abs(vals), axis=0) > SUPPORT_FLOOR * np.max(np.abs(vals))
        self.omega = grid.omega[keep]
        self.coeff = vals[:, keep] * grid.weights[keep] / math.sqrt(2 * math.pi)
        self.spacing = grid.spacing

    @property
    def period(self) -> float:
        """Aliasing period 2 pi / d omega of the discrete transform."""
        return 2 * math.pi / self.spacing

    def __call__(self, t: float) -> np.ndarray:
        return self.coeff @ np.exp(-1j * self.omega * t)

    def sample(self, t: np.ndarray) -> np.ndarray:
        """Values at many times, shape (n_modes, len(t))."""
        return self.coeff @ np.exp(-1j * np.outer(self.omega, np.asarray(t)))


def input_coupling(u, t, t0: float | None = None, eps_reg: float = EPS_REG):
    """Emission coupling g_u(t) = u*(t)/sqrt(1 - int_{t0}^t |u|^2 dt').

    Args:
        u: A GaussianPulse (analytic, centered at t = 0) or a pair
            ``(times, samples)`` of a temporal mode on a grid starting at t0.
        t: Time(s); for sampled modes must be grid times.
        t0: Unused for Gaussian pulses; for samples defaults to times[0].
        eps_reg: Floor of the remaining-norm denominator.
    """
    if isinstance(u, GaussianPulse):
        tail = u.tail_norm(t)
        return np.conj(u.temporal(t)) / np.sqrt(np.maximum(tail, eps_reg))
    times, samples = (np.asarray(a) for a in u)
    cum = cumulative_trapezoid(np.abs(samples) ** 2, times, initial=0.0)
    if t0 is not None and t0 != times[0]:
        cum = cum - np.interp(t0, times, cum)
    g = np.conj(samples) / np.sqrt(np.maximum(1.0 - cum, eps_reg))
    return np.interp(t, times, g.real) + 1j * np.interp(t, times, g.imag)


def scattered_mode_overlap(v0: np.ndarray, v1: np.ndarray, t: np.ndarray, eps_reg: float = EPS_REG, overlap_tol: float = 1e-6) -> np.ndarray:
    """Shape v1'(t) = v1 - v0 int^t v0* v1 / int^t |v0|^2 of the field behind a v0 absorber.

    Where int^t |v0|^2 < eps_reg the pointwise limit v1 - v0 (v0* v1)/|v0|^2
    is used.

    Raises:
        ModesNotOrthogonal: If |<v0, v1>| exceeds ``overlap_tol``.
    """
    v0, v1, t = (np.asarray(a) for a in (v0, v1, t))
    overlap = trapezoid(np.conj(v0) * v1, t)
    if abs(overlap) > overlap_tol:
        raise ModesNotOrthogonal(f"|<v0, v1>| = {abs(overlap):.3g}")
    n0 = cumulative_trapezoid(np.abs(v0) ** 2, t, initial=0.0)
    m = cumulative_trapezoid(np.conj(v0) * v1, t, initial=0.0)
    p0 = np.abs(v0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(n0 >= eps_reg, m / np.where(n0 >= eps_reg, n0, 1.0), np.where(p0 > 0, np.conj(v0) * v1 / np.where(p0 > 0, p0, 1.0), 0.0))
    return v1 - v0 * ratio


def frequency_domain_amplitudes(node: NodeParams, u: Spectrum, alpha_u0: float = 1 / math.sqrt(2)) -> list[tuple[Spectrum, Spectrum]]:
    """Cavity and excited-state spectra per qubit branch.

    alpha_c~ = sqrt(kappa1) alpha_u0 u~ / (i omega - kappa/2 - i g^2/(omega - delta + i gamma/2))
    and alpha_e~ = g alpha_c~ / (omega - delta + i gamma/2).
    """
    validate_node(node)
    w = u.omega
    out = []
    for t in node.transitions:
        lorentz = (w - t.delta) + 0.5j * t.gamma
        ac = math.sqrt(node.kappa1) * alpha_u0 * u.values / (1j * w - node.kappa / 2 - 1j * t.g**2 / lorentz)
        out.append((u.with_values(ac), u.with_values(t.g * ac / lorentz)))
    return out


@dataclass(frozen=True)
class TrajectoryState:
    """Amplitude trajectory at the integrator's accepted steps.

    Attributes:
        t: Times, shape (n,).
        alpha: Amplitudes, shape (n, 2, 5): step, qubit branch, component
            (alpha_u, alpha_c, alpha_e, alpha_v0, alpha_v1).
        expected: Frequency-domain output amplitudes alpha^k_{v_l}, shape (2, 2).
        decomposition: Output modes used for the absorbers.
    """

    t: np.ndarray
    alpha: np.ndarray
    expected: np.ndarray
    decomposition: ModeDecomposition

    def component(self, name: str) -> np.ndarray:
        """Trajectory of one component, shape (n, 2)."""
        return self.alpha[:, :, COMPONENTS.index(name)]

    @property
    def norm(self) -> np.ndarray:
        return np.sum(np.abs(self.alpha) ** 2, axis=(1, 2))

    @property
    def final_outputs(self) -> np.ndarray:
        """alpha^k_{v_l}(T), shape (2, 2)."""
        return self.alpha[-1, :, 3:5]

    def output_spectra(self) -> list[Spectrum]:
        """Reflected spectra sum_l alpha^k_{v_l}(T) v_l~ per branch."""
        d = self.decomposition
        out = []
        for k in range(2):
            s = d.v0 * self.final_outputs[k, 0]
            if d.v1 is not None:
                s = s + d.v1 * self.final_outputs[k, 1]
            out.append(s)
        return out

    def to_csv(self, path: str | Path) -> None:
        """Dump ``t,branch,re_alpha_u,im_alpha_u,...`` with 17 significant digits."""
        cols = ["t", "branch"] + [f"{p}_{c}" for c in COMPONENTS for p in ("re", "im")]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for i, t in enumerate(self.t):
                for k in range(2):
                    row = [f"{t:.17g}", str(k)]
                    for a in self.alpha[i, k]:
                        row += [f"{a.real:.17g}", f"{a.imag:.17g}"]
                    w.writerow(row)


def _slowest_rate(node: NodeParams) -> float:
    rates = []
    for t in node.transitions:
        m = np.array([[-node.kappa / 2, -1j * t.g], [-1j * t.g, -1j * t.delta - t.gamma / 2]])
        rates.append(np.min(-np.linalg.eigvals(m).real))
    return float(min(rates))


def time_window(node: NodeParams, pulse: GaussianPulse) -> tuple[float, float]:
    """Integration window: 6 temporal widths before the pulse center to the ring-down end."""
    width = 1.0 / pulse.sigma_u
    ring = min(RING_DOWN / _slowest_rate(node), MAX_RING_DOWN)
    return -GAUSSIAN_TRUNCATION * width, GAUSSIAN_TRUNCATION * width + ring


def time_domain_grid(node: NodeParams, pulse: PulseSpec, t_span: tuple[float, float]) -> FrequencyGrid:
    """Frequency grid whose aliasing period is at least twice the window length."""
    grid = default_grid(pulse, (node,))
    length = t_span[1] - t_span[0]
    while grid.spacing > math.pi / length:
        grid = FrequencyGrid(grid.start, grid.stop, 2 * grid.n)
    return grid


def _output_modes(node: NodeParams, u: Spectrum) -> ModeDecomposition:
    tr = transfer_pair(node, u.omega)
    try:
        return decompose_modes(u, tr)
    except DegenerateAntisymmetric:
        # r_0 = r_1: the reflected photon occupies the single mode r_+ u~
        plus = u.with_values(tr.r_plus * u.values)
        n = plus.norm()
        if n < 1e-12:
            raise
        return ModeDecomposition(0j, complex(n), 0j, plus * (1 / n), None)


def integrate_scattering(
    node: NodeParams,
    u: PulseSpec,
    t_span: tuple[float, float] | None = None,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    method: str = "RK45",
    grid: FrequencyGrid | None = None,
    eps_reg: float = EPS_REG,
) -> TrajectoryState:
    """Integrate the amplitude equations for both qubit branches.

    Each branch starts with alpha_u = 1/sqrt(2). The output modes are taken
    from the frequency-domain decomposition on ``grid``.

    Args:
        node: Node parameters.
        u: Input pulse; Gaussian pulses are centered at t = 0.
        t_span: Window; defaults to :func:`time_window` for Gaussians and is
            required for sampled pulses.
        rtol, atol: Integrator tolerances.
        method: ``solve_ivp`` method (embedded Runge-Kutta).
        grid: Frequency grid for the modes (default :func:`time_domain_grid`).
        eps_reg: Floor for the coupling denominators.

    Raises:
        StepSizeUnderflow: If the integrator fails.
        NormViolation: If the total norm grows by more than 1e-9 in a step.
    """
    validate_node(node)
    if t_span is None:
        if not isinstance(u, GaussianPulse):
            raise PreconditionViolated("t_span is required for sampled pulses")
        t_span = time_window(node, u)
    t0, t1 = map(float, t_span)
    if grid is None:
        grid = time_domain_grid(node, u, (t0, t1))
    spec = spectrum_of(u, grid)
    dec = _output_modes(node, spec)
    has_v1 = dec.v1 is not None
    modes = TemporalModes([spec, dec.v0] + ([dec.v1] if has_v1 else []))
    if t1 - t0 > 0.5 * modes.period:
        raise PreconditionViolated(f"window length {t1 - t0:.3g} exceeds half the aliasing period {modes.period:.3g}")
    gaussian = isinstance(u, GaussianPulse)
    sk1 = math.sqrt(node.kappa1)
    kappa = node.kappa
    trans = node.transitions
    a0 = 1 / math.sqrt(2)

    def rhs(t, y):
        vals = modes(t)
        u_t, v0_t = vals[0], vals[1]
        v1_t = vals[2] if has_v1 else 0j
        if gaussian:
            u_t = complex(u.temporal(t))
            tail = float(u.tail_norm(t))
        else:
            tail = 1.0 - y[13].real
        g_u = np.conj(u_t) / math.sqrt(max(tail, eps_reg))
        n0, m, n1 = y[10].real, y[11], y[12].real
        g_v0 = -np.conj(v0_t) / math.sqrt(max(n0, eps_reg))
        if n0 >= eps_reg:
            v1p = v1_t - v0_t * m / n0
        else:
            p0 = abs(v0_t) ** 2
            v1p = v1_t - v0_t * np.conj(v0_t) * v1_t / p0 if p0 > 0 else v1_t
        g_v1 = -np.conj(v1p) / math.sqrt(max(n1, eps_reg)) if has_v1 else 0j
        dy = np.empty_like(y)
        for k in range(2):
            au, ac, ae, av0, av1 = y[5 * k : 5 * k + 5]
            tr = trans[k]
            field = np.conj(g_u) * au + sk1 * ac
            dy[5 * k] = -0.5 * abs(g_u) ** 2 * au
            dy[5 * k + 1] = -1j * tr.g * ae - sk1 * np.conj(g_u) * au - 0.5 * kappa * ac
            dy[5 * k + 2] = -1j * tr.delta * ae - 1j * tr.g * ac - 0.5 * tr.gamma * ae
            dy[5 * k + 3] = -0.5 * abs(g_v0) ** 2 * av0 - g_v0 * field
            dy[5 * k + 4] = -0.5 * abs(g_v1) ** 2 * av1 - g_v1 * (field + np.conj(g_v0) * av0)
        dy[10] = abs(v0_t) ** 2
        dy[11] = np.conj(v0_t) * v1_t
        dy[12] = abs(v1p) ** 2
        dy[13] = abs(u_t) ** 2
        return dy

    y0 = np.zeros(14, dtype=complex)
    y0[0] = y0[5] = a0
    width = 1.0 / u.sigma_u if gaussian else (t1 - t0) / 20
    sol = solve_ivp(rhs, (t0, t1), y0, method=method, rtol=rtol, atol=atol, max_step=width)
    if sol.status != 0:
        raise StepSizeUnderflow(sol.message)
    alpha = sol.y[:10].T.reshape(-1, 2, 5)
    norm = np.sum(np.abs(alpha) ** 2, axis=(1, 2))
    jumps = np.diff(norm)
    if jumps.size and jumps.max() > NORM_STEP_TOL:
        i = int(np.argmax(jumps))
        raise NormViolation(f"norm grew by {jumps[i]:.3g} at t = {sol.t[i + 1]:.6g}")
    expected = a0 * np.array(
        [
            [dec.alpha_v0_plus + dec.alpha_v0_minus, dec.alpha_v1_plus],
            [dec.alpha_v0_plus - dec.alpha_v0_minus, dec.alpha_v1_plus],
        ]
    )
    return TrajectoryState(sol.t, alpha, expected, dec)


@dataclass(frozen=True)
class CrossValidation:
    """Comparison of the time-domain and frequency-domain pipelines.

    Attributes:
        relative_l2: Per branch, ||ODE output spectrum - r_k alpha_u u~|| / ||r_k alpha_u u~||
            (absolute error when the reference norm is below 1e-8).
        amplitude_error: max |alpha^k_{v_l}(T) - expected|.
        norm_monotone: Whether the norm never grew by more than 1e-9 per step.
        steps: Accepted integrator steps.
    """

    relative_l2: tuple[float, float]
    amplitude_error: float
    norm_monotone: bool
    steps: int


def cross_validate(node: NodeParams, pulse: GaussianPulse, **kwargs) -> tuple[CrossValidation, TrajectoryState]:
    """Run the ODE and compare its output spectra with r_k(omega) u~(omega) / sqrt 2."""
    traj = integrate_scattering(node, pulse, **kwargs)
    grid = traj.decomposition.v0.grid
    u = spectrum_of(pulse, grid)
    tr = transfer_pair(node, grid.omega)
    errs = []
    for k, spec in enumerate(traj.output_spectra()):
        ref = u.with_values((tr.r0, tr.r1)[k] * u.values / math.sqrt(2))
        diff = (spec - ref).norm()
        n = ref.norm()
        errs.append(diff / n if n > 1e-8 else diff)
    monotone = bool(np.all(np.diff(traj.norm) <= NORM_STEP_TOL))
    amp = float(np.max(np.abs(traj.final_outputs - traj.expected)))
    return CrossValidation(tuple(errs), amp, monotone, len(traj.t) - 1), traj
