"""Row generators for each scenario kind.

Every generator takes one fully resolved configuration tree (sweep and scan
values already substituted) and returns a list of rows. Rows carry the
resolved physical parameters, so each one can be reproduced by a direct
library call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compare import compare_protocols
from .config import ConfigError, as_node, node_from_block, node_pair, pulse_from_block, setup_from_block
from .errors import CqedLinkError, NotConverged, PreconditionViolated
from .model import FourLevelConfig, NodeDeviation, NodeParams, expand_four_level, random_node
from .optimize import flatness_optimize, intensity_encoding_points, optimize_siv_detuning
from .protocol import classify_encoding, fidelity_nv_perturbative, fidelity_taylor, run_protocol
from .pulse import GaussianPulse, default_grid, spectrum_of
from .readout import intensity_readout, phase_readout
from .spectral import transfer_pair
from .timedomain import cross_validate

NAN = math.nan


@dataclass
class Job:
    """One unit of work: a resolved configuration plus run options.

    Attributes:
        data: Configuration tree with sweep/scan values substituted.
        base_dir: Directory for relative file references.
        grid_points: Optional quadrature point count.
        omega: Frequencies for transfer sweeps.
        seed: Seed for randomized scenarios.
        index: Position of the job in sweep order.
    """

    data: dict
    base_dir: str
    grid_points: int | None = None
    omega: np.ndarray | None = None
    seed: int = 0
    index: int = 0


@dataclass
class JobResult:
    """Rows of one job plus convergence information.

    Attributes:
        rows: Data rows.
        converged: False if any numerical routine failed to converge.
        failures: Messages of the failures.
        optima: Optimizer results (optimize and siv-sweep scenarios).
        maps: Extra rows for the fig6-style 2-D maps.
    """

    rows: list
    converged: bool = True
    failures: list = field(default_factory=list)
    optima: list = field(default_factory=list)
    maps: list = field(default_factory=list)


def node_columns(node: NodeParams, suffix: str = "") -> dict:
    """Resolved parameters of a node (transition 0 for C, gamma, delta)."""
    t = node.transitions[0]
    cols = {
        "C": node.cooperativity(0),
        "kappa": node.kappa,
        "kappa1_ratio": node.coupling_ratio,
        "gamma": t.gamma,
        "delta": t.delta,
    }
    if not node.is_three_level:
        cols["C1"] = node.cooperativity(1)
        cols["delta1"] = node.transitions[1].delta
    return {k + suffix: v for k, v in cols.items()}


def _grid(job: Job, pulse, nodes):
    return default_grid(pulse, nodes, n=job.grid_points) if job.grid_points else None


def _pulse(job: Job):
    return pulse_from_block(job.data["pulse"], Path(job.base_dir))


def _pulse_columns(pulse) -> dict:
    if isinstance(pulse, GaussianPulse):
        return {"sigma_u": pulse.sigma_u, "pulse_delta": pulse.delta}
    return {"sigma_u": NAN, "pulse_delta": pulse.delta}


def transfer_sweep(job: Job) -> JobResult:
    node = as_node(node_from_block(job.data["node"], "node"))
    tr = transfer_pair(node, job.omega)
    rho = node.coupling_ratio
    base = node_columns(node)
    rows = []
    for i, w in enumerate(job.omega):
        rows.append(
            {
                "omega": float(w),
                **base,
                "r_minus_sq": float(abs(tr.r_minus[i]) ** 2),
                "r_plus_sq": float(abs(tr.r_plus[i]) ** 2),
                "r0_sq": float(abs(tr.r0[i]) ** 2),
                "r1_sq": float(abs(tr.r1[i]) ** 2),
                "r_minus_sq_normalized": float(abs(tr.r_minus[i]) ** 2 / rho**2),
            }
        )
    return JobResult(rows)


def protocol(job: Job) -> JobResult:
    a, b, dev = node_pair(job.data)
    pulse = _pulse(job)
    setup = setup_from_block(job.data.get("setup", {}))
    grid = _grid(job, pulse, (a, b))
    out = run_protocol(a, b, pulse, setup, grid)
    row = {**node_columns(a)}
    if b is not a:
        row.update(node_columns(b, "_b"))
    row.update(_pulse_columns(pulse))
    row["eta"] = setup.eta
    if dev is not None:
        row["scale"] = float(job.data["deviation"].get("scale", 1.0))
    u = spectrum_of(pulse, grid if grid is not None else default_grid(pulse, (a, b)))
    row.update(
        {
            "encoding": classify_encoding(a, u).value,
            "P_a": out.P_a,
            "P_b": out.P_b,
            "P_a_over_eta": out.P_a / setup.eta,
            "P_b_over_eta": out.P_b / setup.eta,
            "F_a": out.F_a,
            "F_b": out.F_b,
        }
    )
    for port in ("a", "b"):
        row[f"F_{port}_taylor"] = _safe(lambda: fidelity_taylor(a, b, pulse, port)) if isinstance(pulse, GaussianPulse) else NAN
    for port in ("a", "b"):
        row[f"F_{port}_perturbative"] = _perturbative(job.data, a, b, dev, pulse, port)
    return JobResult([row])


def _safe(fn) -> float:
    try:
        return float(fn())
    except (CqedLinkError, ZeroDivisionError):
        return NAN


def _perturbative(data, a: NodeParams, b: NodeParams, dev, pulse, port: str) -> float:
    """Second-order fidelity for three-level twins on resonance; NaN when inapplicable."""
    if not (isinstance(pulse, GaussianPulse) and a.is_three_level and pulse.delta == 0):
        return NAN
    if dev is None:
        if b is not a:
            return NAN
        dev = NodeDeviation()
    elif a.transitions[0].delta != dev.delta_A:
        return NAN
    C, gamma = a.cooperativity(0), a.transitions[0].gamma
    try:
        return fidelity_nv_perturbative(C, a.kappa, a.kappa1, gamma, dev, pulse.sigma_u, port)
    except PreconditionViolated:
        return NAN


def _bounds(block: dict, key: str, default: tuple[float, float]) -> tuple[float, float]:
    b = block.get(key, default)
    if not (isinstance(b, (list, tuple)) and len(b) == 2):
        raise ConfigError(f"optimize.{key}", "expected [low, high]")
    return float(b[0]), float(b[1])


def optimize(job: Job) -> JobResult:
    block = job.data.get("optimize", {})
    target = block.get("target", "flatness")
    if target == "intensity-roots":
        node = as_node(node_from_block(job.data["node"], "node"))
        base = node_columns(node)
        try:
            roots = intensity_encoding_points(node)
        except CqedLinkError as exc:
            return JobResult([{**base, "branch": -1, "omega_root": NAN, "delta_root": NAN, "contrast": NAN, "converged": False}], False, [str(exc)])
        rows = [{**base, "branch": r.branch, "omega_root": r.omega, "delta_root": r.delta, "contrast": r.contrast, "converged": True} for r in roots]
        return JobResult(rows, optima=[{"branch": r.branch, "omega": r.omega, "delta": r.delta} for r in roots])
    if target != "flatness":
        raise ConfigError("optimize.target", f"must be 'flatness' or 'intensity-roots', got {target!r}")
    node_block = job.data["node"]
    node = as_node(node_from_block(node_block, "node"))
    if not node.is_three_level:
        raise ConfigError("node.model", "flatness optimization needs a three-level node")
    C, gamma = node.cooperativity(0), node.transitions[0].gamma
    free = block.get("free", ["kappa"])
    if isinstance(free, str):
        free = [free]
    objective = block.get("objective", "r_minus")
    bounds = {
        "kappa": _bounds(block, "kappa_bounds", (0.1 * gamma, 100.0 * gamma)),
        "kappa1_ratio": _bounds(block, "kappa1_ratio_bounds", (0.5, 1.0)),
    }
    kw = dict(
        gamma=gamma,
        kappa=node.kappa,
        kappa1_ratio=node.coupling_ratio,
        delta=node.transitions[0].delta,
        omega=float(block.get("omega", 0.0)),
        phase_constraint=bool(block.get("phase_constraint", False)),
    )
    try:
        res, converged, failures = flatness_optimize(objective, free, {p: bounds[p] for p in free}, C, **kw), True, []
    except NotConverged as exc:
        res, converged, failures = exc.result, False, [str(exc)]
    except (ValueError, PreconditionViolated) as exc:
        raise ConfigError("optimize", str(exc)) from exc
    row = {"C": C, "gamma": gamma, "objective": objective, "free": "+".join(free)}
    if res is None:
        row.update({"kappa_o": NAN, "kappa1_ratio_o": NAN, "fun": NAN, "iterations": 0, "converged": False})
        return JobResult([row], False, failures)
    row.update(
        {
            "kappa_o": res.x.get("kappa", node.kappa),
            "kappa1_ratio_o": res.x.get("kappa1_ratio", node.coupling_ratio),
            "fun": res.fun,
            "d2_r_minus": res.extra.get("d2_r_minus", NAN),
            "d2_r_plus": res.extra.get("d2_r_plus", NAN),
            "r_plus_sq": res.extra.get("r_plus_sq", NAN),
            "iterations": res.iterations,
            "converged": res.converged,
        }
    )
    return JobResult([row], converged and res.converged, failures, [{"C": C, **res.x, "fun": res.fun, "converged": res.converged}])


def timedomain_check(job: Job) -> JobResult:
    solver = {k: v for k, v in job.data.get("solver", {}).items() if k in ("rtol", "atol", "method")}
    if "random" in job.data:
        rng = np.random.default_rng(job.seed)
        draws = int(job.data["random"].get("draws", 20))
        cases = []
        for i in range(draws):
            four = bool(i % 2)
            node = random_node(rng, four_level=four)
            cases.append((i, "four-level" if four else "three-level", node, GaussianPulse(float(rng.uniform(0.1, 1.0)))))
    else:
        node = as_node(node_from_block(job.data["node"], "node"))
        cases = [(0, "three-level" if node.is_three_level else "two-transition", node, _pulse(job))]
    rows, failures = [], []
    for i, kind, node, pulse in cases:
        if not isinstance(pulse, GaussianPulse):
            raise ConfigError("pulse", "timedomain-check needs a Gaussian pulse")
        row = {"draw": i, "model": kind, **node_columns(node), "sigma_u": pulse.sigma_u}
        try:
            cv, _ = cross_validate(node, pulse, **solver)
            row.update(
                {
                    "rel_l2_0": cv.relative_l2[0],
                    "rel_l2_1": cv.relative_l2[1],
                    "amplitude_error": cv.amplitude_error,
                    "norm_monotone": cv.norm_monotone,
                    "steps": cv.steps,
                    "converged": True,
                }
            )
        except CqedLinkError as exc:
            failures.append(f"draw {i}: {exc}")
            row.update({"rel_l2_0": NAN, "rel_l2_1": NAN, "amplitude_error": NAN, "norm_monotone": False, "steps": 0, "converged": False})
        rows.append(row)
    return JobResult(rows, not failures, failures)


def compare(job: Job) -> JobResult:
    node = as_node(node_from_block(job.data["node"], "node"))
    pulse = _pulse(job)
    setup = job.data.get("setup", {})
    eta = float(setup.get("eta", 1.0))
    theta = float(setup.get("theta_prep", 0.1))
    try:
        rep = compare_protocols(node, pulse, eta, theta, _grid(job, pulse, (node,)))
    except PreconditionViolated as exc:
        raise ConfigError("setup", str(exc)) from exc
    row = {
        **node_columns(node),
        **_pulse_columns(pulse),
        "eta": eta,
        "theta_prep": theta,
        "p_em": rep.p_em,
        "p_barrett_kok": rep.p_barrett_kok,
        "p_single_click": rep.p_single_click,
        "p_reflection_single_port": rep.p_reflection_single_port,
        "p_reflection_two_port": rep.p_reflection_two_port,
        "emitter_narrow": rep.emitter_narrow,
        "pulse_narrow": rep.pulse_narrow,
        "matching_error": rep.matching_error,
    }
    return JobResult([row])


def siv_sweep(job: Job) -> JobResult:
    block = job.data["node"]
    cfg = node_from_block(block, "node")
    if not isinstance(cfg, FourLevelConfig):
        raise ConfigError("node.model", "siv-sweep needs a four-level node")
    mode = "enforce" if block.get("kappa1_ratio", "phase") == "phase" else "fixed"
    step = job.data.get("solver", {}).get("delta_step")
    C, gamma = cfg.cooperativity, cfg.base.transitions[0].gamma
    row = {"C": C, "kappa": cfg.base.kappa, "gamma": gamma, "zeta": cfg.zeta, "kappa1_mode": mode}
    failures = []
    try:
        res = optimize_siv_detuning(cfg, kappa1_mode=mode, delta_step=step)
    except NotConverged as exc:
        res = exc.result
        failures.append(f"C={C:.6g}: {exc}")
    if res is None:
        row.update({k: NAN for k in ("delta_o", "omega_o", "kappa1_ratio_o", "r_minus_sq", "r_plus_sq", "normalized_peak", "d2_r_minus", "d2_r_plus")})
        row.update({"iterations": 0, "converged": False})
        return JobResult([row], False, failures)
    row.update(
        {
            "delta_o": res.x["delta"],
            "omega_o": res.x["omega"],
            "kappa1_ratio_o": res.x["kappa1_ratio"],
            "r_minus_sq": res.extra["r_minus_sq"],
            "r_plus_sq": res.extra["r_plus_sq"],
            "normalized_peak": res.extra["normalized_peak"],
            "d2_r_minus": res.extra["d2_r_minus"],
            "d2_r_plus": res.extra["d2_r_plus"],
            "iterations": res.iterations,
            "converged": res.converged,
        }
    )
    maps = []
    mblock = job.data.get("maps")
    if mblock:
        omega = np.linspace(float(mblock.get("omega_start", -50.0)), float(mblock.get("omega_stop", 50.0)), int(mblock.get("points", 401)))
        node = expand_four_level(cfg.with_(delta=res.x["delta"], kappa1_ratio=res.x["kappa1_ratio"]))
        tr = transfer_pair(node, omega)
        for i, w in enumerate(omega):
            maps.append(
                {
                    "C": C,
                    "delta_o": res.x["delta"],
                    "kappa1_ratio_o": res.x["kappa1_ratio"],
                    "omega": float(w),
                    "r_minus_sq": float(abs(tr.r_minus[i]) ** 2),
                    "r_plus_sq": float(abs(tr.r_plus[i]) ** 2),
                }
            )
    optimum = {"C": C, **res.x, "normalized_peak": res.extra["normalized_peak"], "converged": res.converged}
    return JobResult([row], res.converged and not failures, failures, [optimum], maps)


def readout(job: Job) -> JobResult:
    node = as_node(node_from_block(job.data["node"], "node"))
    pulse = _pulse(job)
    grid = _grid(job, pulse, (node,))
    ph = phase_readout(node, pulse, grid=grid)
    row = {**node_columns(node), **_pulse_columns(pulse)}
    if node.is_three_level:
        it = intensity_readout(node, pulse, grid)
        row["intensity_contrast"] = it.contrast
    else:
        row["intensity_contrast"] = NAN
    row.update(
        {
            "p_reflect_state0": ph.p_reflect_state0,
            "p_reflect_state1": ph.p_reflect_state1,
            "p_state0_port_a": ph.port_probs[0, 0],
            "p_state0_port_b": ph.port_probs[0, 1],
            "p_state1_port_a": ph.port_probs[1, 0],
            "p_state1_port_b": ph.port_probs[1, 1],
            "phase_readout_error": ph.error,
        }
    )
    return JobResult([row])


RUNNERS = {
    "transfer-sweep": transfer_sweep,
    "protocol": protocol,
    "optimize": optimize,
    "timedomain-check": timedomain_check,
    "compare": compare,
    "siv-sweep": siv_sweep,
    "readout": readout,
}


def run_job(scenario: str, job: Job) -> JobResult:
    return RUNNERS[scenario](job)
