"""Scenario configuration files: parsing, validation and node construction.

A configuration is a TOML file. Every scenario reads the same blocks::

    scenario = "protocol"

    [node]                  # node A; node B copies it unless [node_b] or [deviation]
    model = "three-level"   # three-level | four-level | explicit
    C = 2.0
    kappa = "opt"           # number, "opt" or "<factor>*opt"
    kappa1_ratio = "phase"  # number or "phase"

    [pulse]
    sigma_u = 0.5

    [sweep]
    parameter = "pulse.sigma_u"
    start = 0.01
    stop = 3.0
    points = 40
    spacing = "log"         # linear | log; or give `values = [...]`

    [scan]                  # optional outer product
    "node.C" = [1, 2]

    [output]
    name = "fig5"
"""
from __future__ import annotations

import copy
import hashlib
import itertools
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import NonPhysicalParameter
from .model import FourLevelConfig, NodeDeviation, NodeParams, SetupParams, TransitionParams, deviated_pair, expand_four_level
from .optimize import optimal_kappa, phase_encoding_ratio
from .pulse import GaussianPulse, SampledPulse, read_spectrum_csv

SCENARIOS = ("transfer-sweep", "protocol", "optimize", "timedomain-check", "compare", "siv-sweep", "readout")
MODELS = ("three-level", "four-level", "explicit")
NODE_KEYS = ("model", "C", "kappa", "kappa1_ratio", "gamma", "delta", "zeta", "kappa1", "kappa2", "transitions")
BLOCK_KEYS = {
    "node": NODE_KEYS,
    "node_b": NODE_KEYS,
    "pulse": ("sigma_u", "delta", "file"),
    "setup": ("eta", "phi", "theta_prep"),
    "deviation": ("eps_C", "eps_kappa", "eps_kappa1", "eps_gamma", "delta_A", "delta_B", "scale", "relative"),
    "random": ("draws", "seed"),
    "maps": ("omega_start", "omega_stop", "points"),
    "solver": ("rtol", "atol", "method", "delta_step"),
    "optimize": ("target", "objective", "free", "kappa_bounds", "kappa1_ratio_bounds", "phase_constraint", "omega"),
}
TOP_KEYS = ("scenario", "title", "node", "node_b", "pulse", "setup", "deviation", "sweep", "scan", "output", "random", "maps", "solver", "optimize")
SWEEP_SPECIAL = ("omega",)


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated configuration.

    Attributes:
        data: Parsed TOML tree.
        sha256: Hash of the file bytes.
        source: File path.
    """

    data: dict
    sha256: str
    source: str

    @property
    def scenario(self) -> str:
        return self.data["scenario"]

    @property
    def name(self) -> str:
        return str(self.data.get("output", {}).get("name", Path(self.source).stem))

    def sweep_values(self) -> tuple[str | None, np.ndarray]:
        sweep = self.data.get("sweep")
        if not sweep:
            return None, np.array([math.nan])
        return sweep["parameter"], sweep_values(sweep)

    def scan_points(self) -> list[dict]:
        scan = self.data.get("scan", {})
        keys = list(scan)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(scan[k] for k in keys))]


def sweep_values(sweep: dict) -> np.ndarray:
    if "values" in sweep:
        return np.asarray(sweep["values"], dtype=float)
    start, stop, n = float(sweep["start"]), float(sweep["stop"]), int(sweep["points"])
    if sweep.get("spacing", "linear") == "log":
        return np.geomspace(start, stop, n)
    return np.linspace(start, stop, n)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a configuration file.

    Raises:
        ConfigError: With the offending field name.
    """
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError("file", f"not valid TOML: {exc}") from exc
    cfg = ScenarioConfig(data, hashlib.sha256(raw).hexdigest(), str(path))
    validate_config(cfg)
    return cfg


def _number(field: str, value, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(field, "must be finite")
    if positive and not v > 0:
        raise ConfigError(field, f"must be > 0, got {v}")
    if nonneg and not v >= 0:
        raise ConfigError(field, f"must be >= 0, got {v}")
    return v


_OPT = re.compile(r"^\s*(?:([0-9.eE+-]+)\s*\*\s*)?opt\s*$")


def resolve_kappa(field: str, value, C: float, gamma: float) -> float:
    """Number, ``"opt"`` or ``"<factor>*opt"`` (multiples of the flat-response kappa)."""
    if isinstance(value, str):
        m = _OPT.match(value)
        if not m:
            raise ConfigError(field, f"expected a number, 'opt' or '<factor>*opt', got {value!r}")
        if not C > 0:
            raise ConfigError(field, "'opt' needs C > 0")
        factor = float(m.group(1)) if m.group(1) else 1.0
        return _number(field, factor * optimal_kappa(C, gamma), positive=True)
    return _number(field, value, positive=True)


def resolve_ratio(field: str, value, C: float) -> float:
    """Number in (0, 1] or ``"phase"`` ((C+1)/(C+2))."""
    if value == "phase":
        if not C > 0:
            raise ConfigError(field, "'phase' needs C > 0")
        return phase_encoding_ratio(C)
    v = _number(field, value)
    if not 0 < v <= 1:
        raise ConfigError(field, f"must lie in (0, 1], got {v}")
    return v


def node_from_block(block: dict, prefix: str = "node") -> NodeParams | FourLevelConfig:
    """Build node parameters; four-level blocks yield a FourLevelConfig.

    Raises:
        ConfigError: Naming the offending key.
    """
    model = block.get("model", "three-level")
    if model not in MODELS:
        raise ConfigError(f"{prefix}.model", f"must be one of {MODELS}, got {model!r}")
    for key in block:
        if key not in NODE_KEYS:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
    try:
        if model == "explicit":
            trans = block.get("transitions")
            if not isinstance(trans, list) or len(trans) != 2:
                raise ConfigError(f"{prefix}.transitions", "need exactly two tables with g, gamma, delta")
            ts = tuple(
                TransitionParams(
                    _number(f"{prefix}.transitions[{i}].g", t.get("g", 0.0)),
                    _number(f"{prefix}.transitions[{i}].gamma", t.get("gamma", 1.0)),
                    _number(f"{prefix}.transitions[{i}].delta", t.get("delta", 0.0)),
                )
                for i, t in enumerate(trans)
            )
            return NodeParams(_number(f"{prefix}.kappa1", block.get("kappa1")), _number(f"{prefix}.kappa2", block.get("kappa2", 0.0)), ts)
        if "C" not in block:
            raise ConfigError(f"{prefix}.C", "required")
        C = _number(f"{prefix}.C", block["C"], nonneg=True)
        gamma = _number(f"{prefix}.gamma", block.get("gamma", 1.0), positive=True)
        if "kappa" not in block:
            raise ConfigError(f"{prefix}.kappa", "required")
        kappa = resolve_kappa(f"{prefix}.kappa", block["kappa"], C, gamma)
        ratio = resolve_ratio(f"{prefix}.kappa1_ratio", block.get("kappa1_ratio", 1.0), C)
        delta = _number(f"{prefix}.delta", block.get("delta", 0.0))
        if model == "three-level":
            return NodeParams.three_level(C, kappa, ratio, gamma, delta)
        zeta = _number(f"{prefix}.zeta", block.get("zeta", 0.0), nonneg=True)
        return FourLevelConfig.from_cooperativity(C, kappa, zeta, delta, ratio, gamma)
    except NonPhysicalParameter as exc:
        raise ConfigError(f"{prefix}.{exc.field}", str(exc)) from exc


def as_node(node) -> NodeParams:
    return expand_four_level(node) if isinstance(node, FourLevelConfig) else node


def pulse_from_block(block: dict, base_dir: Path) -> GaussianPulse | SampledPulse:
    for key in block:
        if key not in BLOCK_KEYS["pulse"]:
            raise ConfigError(f"pulse.{key}", "unknown key")
    if "file" in block:
        try:
            return SampledPulse(read_spectrum_csv(base_dir / block["file"]))
        except (OSError, ValueError) as exc:
            raise ConfigError("pulse.file", str(exc)) from exc
    if "sigma_u" not in block:
        raise ConfigError("pulse.sigma_u", "required")
    return GaussianPulse(_number("pulse.sigma_u", block["sigma_u"], positive=True), _number("pulse.delta", block.get("delta", 0.0)))


def setup_from_block(block: dict) -> SetupParams:
    eta = _number("setup.eta", block.get("eta", 1.0))
    if not 0 < eta <= 1:
        raise ConfigError("setup.eta", f"must lie in (0, 1], got {eta}")
    return SetupParams(eta, _number("setup.phi", block.get("phi", 0.0)))


def deviation_from_block(block: dict, C: float, kappa: float, kappa1: float, gamma: float) -> NodeDeviation:
    """Offsets of node B; with ``relative = true`` eps_* are fractions of the reference values."""
    vals = {k: _number(f"deviation.{k}", block.get(k, 0.0)) for k in ("eps_C", "eps_kappa", "eps_kappa1", "eps_gamma", "delta_A", "delta_B")}
    if block.get("relative", False):
        vals["eps_C"] *= C
        vals["eps_kappa"] *= kappa
        vals["eps_kappa1"] *= kappa1
        vals["eps_gamma"] *= gamma
    return NodeDeviation(**vals).scaled(_number("deviation.scale", block.get("scale", 1.0)))


def node_pair(data: dict) -> tuple[NodeParams, NodeParams, NodeDeviation | None]:
    """Nodes A and B of a configuration and the deviation used (if any)."""
    a = as_node(node_from_block(data["node"], "node"))
    if "deviation" in data:
        if not a.is_three_level:
            raise ConfigError("deviation", "deviations need a three-level node")
        C, gamma = a.cooperativity(0), a.transitions[0].gamma
        dev = deviation_from_block(data["deviation"], C, a.kappa, a.kappa1, gamma)
        try:
            ra, rb = deviated_pair(C, a.kappa, a.kappa1, gamma, dev)
        except NonPhysicalParameter as exc:
            raise ConfigError(f"deviation.{exc.field}", str(exc)) from exc
        return ra, rb, dev
    b = as_node(node_from_block(data["node_b"], "node_b")) if "node_b" in data else a
    return a, b, None


def set_path(data: dict, path: str, value: Any) -> None:
    block, _, key = path.partition(".")
    data.setdefault(block, {})[key] = value


def with_values(data: dict, values: dict) -> dict:
    out = copy.deepcopy(data)
    for path, value in values.items():
        if path not in SWEEP_SPECIAL:
            set_path(out, path, value)
    return out


def _check_path(field: str, path: str, scenario: str) -> None:
    if path in SWEEP_SPECIAL:
        if scenario != "transfer-sweep":
            raise ConfigError(field, f"'{path}' can only be swept in transfer-sweep")
        return
    block, dot, key = path.partition(".")
    if not dot or block not in BLOCK_KEYS or key not in BLOCK_KEYS[block]:
        raise ConfigError(field, f"unknown parameter {path!r}")


def validate_config(cfg: ScenarioConfig) -> None:
    """Check structure, parameter names and that the base nodes are physical."""
    data = cfg.data
    for key in data:
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown top-level key")
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {SCENARIOS}, got {scenario!r}")
    randomized = scenario == "timedomain-check" and "random" in data
    if "node" not in data and not randomized:
        raise ConfigError("node", "required")
    if randomized:
        draws = data["random"].get("draws", 20)
        if not isinstance(draws, int) or draws < 1:
            raise ConfigError("random.draws", f"must be a positive integer, got {draws!r}")
        seed = data["random"].get("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("random.seed", "must be an unsigned 64-bit integer")
        return
    for block in ("setup", "random", "maps", "solver", "optimize"):
        for key in data.get(block, {}):
            if key not in BLOCK_KEYS[block]:
                raise ConfigError(f"{block}.{key}", "unknown key")
    sweep = data.get("sweep")
    if sweep is not None:
        if "parameter" not in sweep:
            raise ConfigError("sweep.parameter", "required")
        _check_path("sweep.parameter", sweep["parameter"], scenario)
        if "values" in sweep:
            if not isinstance(sweep["values"], list) or len(sweep["values"]) < 2:
                raise ConfigError("sweep.values", "need at least 2 values")
            for v in sweep["values"]:
                _number("sweep.values", v)
        else:
            for key in ("start", "stop", "points"):
                if key not in sweep:
                    raise ConfigError(f"sweep.{key}", "required")
            _number("sweep.start", sweep["start"])
            _number("sweep.stop", sweep["stop"])
            if not isinstance(sweep["points"], int) or sweep["points"] < 2:
                raise ConfigError("sweep.points", f"must be an integer >= 2, got {sweep['points']!r}")
            if sweep.get("spacing", "linear") not in ("linear", "log"):
                raise ConfigError("sweep.spacing", "must be 'linear' or 'log'")
            if sweep.get("spacing") == "log" and not (sweep["start"] > 0 and sweep["stop"] > 0):
                raise ConfigError("sweep.start", "log spacing needs positive bounds")
    elif scenario == "transfer-sweep":
        raise ConfigError("sweep", "transfer-sweep needs an omega sweep")
    for path, values in data.get("scan", {}).items():
        _check_path(f"scan.{path}", path, scenario)
        if path in SWEEP_SPECIAL:
            raise ConfigError(f"scan.{path}", "omega can only be the sweep axis")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"scan.{path}", "expected a nonempty list")
    if scenario in ("protocol", "timedomain-check", "compare", "readout") and "pulse" not in data and "random" not in data:
        raise ConfigError("pulse", "required")
    if scenario == "siv-sweep" and data["node"].get("model") != "four-level":
        raise ConfigError("node.model", "siv-sweep needs a four-level node")
    # every sweep/scan point must build physical nodes
    base_dir = Path(cfg.source).parent
    sweep_param, values = cfg.sweep_values()
    for point in cfg.scan_points():
        for v in values:
            point_values = dict(point)
            if sweep_param is not None:
                point_values[sweep_param] = float(v)
            d = with_values(data, point_values)
            node_pair(d) if scenario != "siv-sweep" else node_from_block(d["node"])
            if "pulse" in d:
                pulse_from_block(d["pulse"], base_dir)
            if "setup" in d:
                setup_from_block(d["setup"])
