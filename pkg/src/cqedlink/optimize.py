"""Closed-form and numerical optimization of node parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .errors import DegenerateAntisymmetric, NoRoots, NotConverged, PreconditionViolated
from .model import FourLevelConfig, NodeParams, expand_four_level
from .spectral import d2_modsq, reflection, transfer_pair

PARAM_TOL = 1e-8
OBJECTIVE_TOL = 1e-12
MAX_EVALUATIONS = 10_000
FLATNESS_STEP = 1e-2  # 5-point stencil step, in units of gamma
PHASE_TOL = 1e-6  # required |r_+(omega_o)|^2


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of a numerical optimization.

    Attributes:
        x: Optimal parameter values by name.
        fun: Objective value at ``x``.
        iterations: Objective evaluations used.
        converged: Whether the tolerance was met within the budget.
        bracket: Search interval per parameter.
        extra: Derived quantities re-evaluated at the optimum.
    """

    x: dict
    fun: float
    iterations: int
    converged: bool
    bracket: dict
    extra: dict = field(default_factory=dict)


def optimal_kappa(C: float, gamma: float = 1.0) -> float:
    """Cavity decay rate (C^2 + 2C + 2) gamma / C flattening the resonant response."""
    if not C > 0:
        raise PreconditionViolated(f"C must be > 0, got {C}")
    return (C * C + 2 * C + 2) * gamma / C


def phase_encoding_ratio(C: float) -> float:
    """kappa1/kappa = (C+1)/(C+2), for which r_+(0) = 0 on resonance."""
    if not C > 0:
        raise PreconditionViolated(f"C must be > 0, got {C}")
    return (C + 1.0) / (C + 2.0)


FREE_PARAMS = ("kappa", "kappa1_ratio")


def flatness_optimize(
    objective: str,
    free: Sequence[str],
    bounds: Mapping[str, tuple[float, float]],
    C: float,
    *,
    gamma: float = 1.0,
    kappa: float | None = None,
    kappa1_ratio: float = 1.0,
    delta: float = 0.0,
    omega: float = 0.0,
    phase_constraint: bool = False,
) -> OptimizationResult:
    """Minimize |d^2|r|^2/d omega^2| at ``omega`` for a three-level node.

    One free parameter uses bounded Brent minimization (golden section with
    parabolic steps); two use bounded Nelder-Mead from the box center.

    Args:
        objective: ``r_minus`` or ``r_plus``.
        free: Subset of ``kappa`` and ``kappa1_ratio``.
        bounds: Search interval per free parameter.
        C: Cooperativity (held fixed; g follows kappa).
        gamma: Transition decay rate.
        kappa, kappa1_ratio, delta: Values of the non-free parameters.
        omega: Frequency at which the curvature is evaluated.
        phase_constraint: Add |r_+(omega)| as a penalty so that the
            optimum also satisfies the phase-encoding condition.

    Raises:
        NotConverged: If the budget of 1e4 evaluations is exhausted.
    """
    if objective not in ("r_minus", "r_plus"):
        raise ValueError(f"objective must be r_minus or r_plus, got {objective!r}")
    free = tuple(free)
    if not free or any(p not in FREE_PARAMS for p in free) or len(set(free)) != len(free):
        raise ValueError(f"free must be a nonempty subset of {FREE_PARAMS}, got {free}")
    box = {p: tuple(map(float, bounds[p])) for p in free}
    for p, (lo, hi) in box.items():
        if not hi > lo:
            raise PreconditionViolated(f"empty bounds for {p}: {box[p]}")
    fixed = {"kappa": kappa, "kappa1_ratio": kappa1_ratio}
    if "kappa" not in free and kappa is None:
        raise PreconditionViolated("kappa must be given when it is not free")
    h = FLATNESS_STEP * max(gamma, abs(omega) + gamma)
    count = [0]

    def node_at(values):
        p = dict(fixed, **dict(zip(free, values)))
        return NodeParams.three_level(C, p["kappa"], p["kappa1_ratio"], gamma, delta)

    def f(values):
        count[0] += 1
        node = node_at(values)
        val = abs(d2_modsq(node, objective, omega, h=h, order=4))
        if phase_constraint:
            # exact (non-squared) penalty keeps the optimum on the constraint
            val += abs(reflection(node, 0, omega) + reflection(node, 1, omega)) / 2
        return val

    if len(free) == 1:
        lo, hi = box[free[0]]
        res = minimize_scalar(
            lambda v: f([v]), bounds=(lo, hi), method="bounded", options={"xatol": PARAM_TOL, "maxiter": MAX_EVALUATIONS}
        )
        xs, fun, ok = [float(res.x)], float(res.fun), bool(res.success)
    else:
        x0 = [0.5 * sum(box[p]) for p in free]
        res = minimize(
            f,
            x0,
            method="Nelder-Mead",
            bounds=[box[p] for p in free],
            options={"xatol": PARAM_TOL, "fatol": OBJECTIVE_TOL, "maxfev": MAX_EVALUATIONS, "adaptive": False},
        )
        xs, fun, ok = [float(v) for v in res.x], float(res.fun), bool(res.success)
    node = node_at(xs)
    extra = {
        "d2_r_minus": d2_modsq(node, "r_minus", omega),
        "d2_r_plus": d2_modsq(node, "r_plus", omega),
        "r_plus_sq": float(abs(transfer_pair(node, omega).r_plus) ** 2),
    }
    result = OptimizationResult(dict(zip(free, xs)), fun, count[0], ok, box, extra)
    if not ok:
        raise NotConverged(f"flatness optimization did not converge after {count[0]} evaluations", result)
    return result


@dataclass(frozen=True)
class IntensityRoot:
    """A configuration where one qubit state is not reflected.

    Attributes:
        omega: Probe frequency.
        delta: Transition detuning.
        branch: Qubit state k with r_k(omega) = 0.
        contrast: |r_{1-k}(omega)|^2 of the other state.
    """

    omega: float
    delta: float
    branch: int
    contrast: float


ROOT_TOL = 1e-10


def intensity_encoding_points(params: NodeParams) -> list[IntensityRoot]:
    """Real roots of r_0 in (omega, delta) and the critically coupled root of r_1.

    With kt = 2 kappa1 - kappa and Ct = 4 g^2/(kt gamma), r_0 vanishes at
    omega = +-sqrt(Ct - 1) kt/2, delta = +-sqrt(Ct - 1)(kt - gamma)/2. The
    uncoupled state is not reflected at omega = 0 when kappa1 = kappa/2.
    Every root is re-checked to |r| < 1e-10.

    Raises:
        PreconditionViolated: If the node is not three-level.
        NoRoots: If neither branch has a real root.
    """
    if not params.is_three_level:
        raise PreconditionViolated("intensity_encoding_points needs g1 = 0")
    t = params.transitions[0]
    kappa = params.kappa
    kt = 2 * params.kappa1 - kappa
    roots: list[IntensityRoot] = []
    if kt > 0:
        Ct = 4 * t.g**2 / (kt * t.gamma)
        if Ct >= 1:
            s = math.sqrt(Ct - 1)
            signs = (1.0,) if s == 0 else (1.0, -1.0)
            for sgn in signs:
                w = sgn * s * kt / 2
                d = sgn * s * (kt - t.gamma) / 2
                node = params.with_delta(d)
                roots.append(IntensityRoot(w, d, 0, float(abs(reflection(node, 1, w)) ** 2)))
    if abs(params.kappa1 - kappa / 2) <= 1e-12 * kappa:
        roots.append(IntensityRoot(0.0, t.delta, 1, float(abs(reflection(params, 0, 0.0)) ** 2)))
    if not roots:
        raise NoRoots(f"no real root: kappa_tilde = {kt:.6g} and kappa1/kappa = {params.coupling_ratio:.6g}")
    for r in roots:
        resid = abs(reflection(params.with_delta(r.delta), r.branch, r.omega))
        if resid > ROOT_TOL:
            raise NotConverged(f"root {r} fails re-evaluation, |r| = {resid:.3g}")
    return roots


def _siv_brackets(cfg: FourLevelConfig) -> tuple[float, float, float]:
    """Search limits (delta_max, omega_max, omega step) for the four-level scan."""
    t = cfg.base.transitions[0]
    kappa = cfg.base.kappa
    C = cfg.cooperativity
    c_th = math.sqrt(1 + (cfg.zeta / t.gamma) ** 2)
    delta_max = 2 * cfg.zeta + 5 * t.gamma + kappa * math.sqrt(max(C / c_th, 1.0))
    omega_max = delta_max + cfg.zeta + 5 * (C + 1) * t.gamma
    step = min(t.gamma, kappa) / 20
    return delta_max, omega_max, step


class _SivObjective:
    """Peak |r_-|^2 over omega at fixed delta, with or without phase encoding."""

    def __init__(self, cfg: FourLevelConfig, enforce: bool):
        self.cfg = cfg
        self.enforce = enforce
        self.delta_max, self.omega_max, self.step = _siv_brackets(cfg)
        n = int(math.ceil(2 * self.omega_max / self.step)) + 1
        self.omega = np.linspace(-self.omega_max, self.omega_max, n)
        self.evaluations = 0
        self.ratio = cfg.base.coupling_ratio

    def _x(self, delta: float, omega):
        # X_k = (1 - r_k)/2 at kappa1 = kappa; r_k = 1 - 2 rho X_k for any rho
        node = expand_four_level(self.cfg.with_(delta=delta, kappa1_ratio=1.0))
        r0 = reflection(node, 0, omega)
        r1 = reflection(node, 1, omega)
        return 0.5 * (1 - r0), 0.5 * (1 - r1)

    def __call__(self, delta: float) -> tuple[float, float, float]:
        """Returns (objective, omega_o, rho_o); objective 0 when infeasible."""
        self.evaluations += 1
        x0, x1 = self._x(delta, self.omega)
        if not self.enforce:
            vals = self.ratio**2 * np.abs(x0 - x1) ** 2
            i = int(np.argmax(vals))
            lo, hi = self.omega[max(i - 1, 0)], self.omega[min(i + 1, len(self.omega) - 1)]
            res = minimize_scalar(
                lambda w: -self.ratio**2 * abs(np.subtract(*self._x(delta, w))) ** 2,
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": PARAM_TOL},
            )
            best = max((vals[i], self.omega[i]), (-res.fun, float(res.x)))
            return float(best[0]), float(best[1]), self.ratio
        im = np.imag(x0 + x1)
        best = (0.0, math.nan, math.nan)
        zero = np.flatnonzero(im == 0)
        change = np.flatnonzero(np.sign(im[:-1]) * np.sign(im[1:]) < 0)
        candidates = [float(self.omega[i]) for i in zero]

        def im_s(w):
            return float(np.imag(sum(self._x(delta, w))))

        for i in change:
            candidates.append(brentq(im_s, self.omega[i], self.omega[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps))
        for w in candidates:
            a, b = self._x(delta, w)
            re_s = float(np.real(a + b))
            if re_s <= 0:
                continue
            rho = 1.0 / re_s
            if not 0.5 < rho <= 1.0:
                continue
            val = rho**2 * abs(a - b) ** 2
            # prefer the non-negative frequency on exact ties
            if val > best[0] * (1 + 1e-12) or (abs(val - best[0]) <= 1e-12 * val and w >= 0 > best[1]):
                best = (val, w, rho)
        return best


def optimize_siv_detuning(
    cfg: FourLevelConfig,
    kappa: float | None = None,
    kappa1_mode: str = "enforce",
    delta_step: float | None = None,
) -> OptimizationResult:
    """Detuning maximizing the peak antisymmetric reflection of a four-level node.

    For each common detuning delta >= 0 the objective is max_omega |r_-|^2.
    In ``enforce`` mode kappa1 is chosen per candidate frequency so that
    r_+(omega) = 0 exactly: with r_k = 1 - 2 rho X_k (rho = kappa1/kappa),
    r_+ = 1 - rho (X_0 + X_1) vanishes where Im(X_0 + X_1) = 0 and
    rho = 1/Re(X_0 + X_1) lies in (1/2, 1]. In ``fixed`` mode the ratio of
    ``cfg.base`` is kept. delta is scanned on a grid and the best cell is
    refined with bounded Brent; mirror solutions at -delta are not reported.

    Args:
        cfg: Four-level configuration (its ``delta`` is ignored).
        kappa: Optional total decay rate; cooperativity is kept fixed.
        kappa1_mode: ``enforce`` or ``fixed``.
        delta_step: Scan step for delta (default gamma/4).

    Raises:
        DegenerateAntisymmetric: If zeta = 0 (r_- vanishes identically).
        NotConverged: If more than 1e4 objective evaluations are needed or no
            feasible phase-encoding point exists.
    """
    if kappa1_mode not in ("enforce", "fixed"):
        raise ValueError(f"kappa1_mode must be 'enforce' or 'fixed', got {kappa1_mode!r}")
    if cfg.zeta == 0:
        raise DegenerateAntisymmetric("zeta = 0: both transitions identical, r_- = 0")
    if kappa is not None:
        t = cfg.base.transitions[0]
        cfg = FourLevelConfig.from_cooperativity(cfg.cooperativity, kappa, cfg.zeta, cfg.delta, cfg.base.coupling_ratio, t.gamma)
    gamma = cfg.base.transitions[0].gamma
    obj = _SivObjective(cfg, kappa1_mode == "enforce")
    step = gamma / 4 if delta_step is None else delta_step
    n = int(math.ceil(obj.delta_max / step)) + 1
    if n + 100 > MAX_EVALUATIONS:
        raise NotConverged(f"delta scan needs {n} evaluations, budget {MAX_EVALUATIONS}")
    deltas = np.linspace(0.0, obj.delta_max, n)
    scan = [obj(d) for d in deltas]
    vals = np.array([s[0] for s in scan])
    i = int(np.argmax(vals))
    best = (float(deltas[i]),) + scan[i]
    lo, hi = deltas[max(i - 1, 0)], deltas[min(i + 1, n - 1)]
    res = minimize_scalar(lambda d: -obj(d)[0], bounds=(lo, hi), method="bounded", options={"xatol": PARAM_TOL, "maxiter": 100})
    refined = (float(res.x),) + obj(float(res.x))
    if refined[1] > best[1]:
        best = refined
    delta_o, value, omega_o, rho_o = best
    bracket = {"delta": (0.0, obj.delta_max), "omega": (-obj.omega_max, obj.omega_max)}
    if not value > 0:
        raise NotConverged("no feasible phase-encoding point in the search bracket")
    # re-evaluate through the transfer functions
    node = expand_four_level(cfg.with_(delta=delta_o, kappa1_ratio=rho_o))
    tr = transfer_pair(node, omega_o)
    r_minus_sq = float(abs(tr.r_minus) ** 2)
    r_plus_sq = float(abs(tr.r_plus) ** 2)
    converged = obj.evaluations <= MAX_EVALUATIONS and (kappa1_mode == "fixed" or r_plus_sq < PHASE_TOL)
    extra = {
        "r_minus_sq": r_minus_sq,
        "r_plus_sq": r_plus_sq,
        "normalized_peak": r_minus_sq / rho_o**2,
        "d2_r_minus": d2_modsq(node, "r_minus", omega_o),
        "d2_r_plus": d2_modsq(node, "r_plus", omega_o),
        "scan_delta": deltas,
        "scan_objective": vals,
    }
    result = OptimizationResult(
        {"delta": delta_o, "omega": omega_o, "kappa1_ratio": rho_o}, r_minus_sq, obj.evaluations, converged, bracket, extra
    )
    if not converged:
        raise NotConverged("four-level detuning optimization did not converge", result)
    return result
