"""Command-line scenario runner.

    cqedlink run CONFIG [--out DIR] [--grid-points N] [--seed S] [--jobs J]
    cqedlink figures {fig4,fig5,fig6} [--out DIR] ...

Each run writes ``<name>.csv`` (data) and ``<name>.summary.json`` and exits
with 0 on success, 2 on configuration errors (nothing written) and 3 when a
numerical routine did not converge (files written, ``converged`` false).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, as_node, load_config, node_from_block, with_values
from .errors import GridTooNarrow, NonPhysicalParameter, PreconditionViolated
from .model import FourLevelConfig
from .optimize import optimal_kappa, phase_encoding_ratio
from .scenarios import Job, JobResult, run_job

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
SUMMARY_SCHEMA = 1

FIGURE_CONFIGS = {
    "fig4": """\
scenario = "transfer-sweep"
title = "Reflection spectra around the flat-response cavity decay rate"

[node]
model = "three-level"
C = 1.0
kappa = "opt"
kappa1_ratio = "phase"

[sweep]
parameter = "omega"
start = -10.0
stop = 10.0
points = 801

[scan]
"node.C" = [1.0, 2.0]
"node.kappa" = ["0.5*opt", "opt", "2*opt"]

[output]
name = "fig4"
""",
    "fig5": """\
scenario = "protocol"
title = "Click probabilities and fidelities of identical phase-encoding nodes versus pulse width"

[node]
model = "three-level"
C = 2.0
kappa = "opt"
kappa1_ratio = "phase"

[pulse]
sigma_u = 0.1

[setup]
eta = 1.0

[sweep]
parameter = "pulse.sigma_u"
start = 0.01
stop = 3.0
points = 40
spacing = "log"

[scan]
"node.kappa" = ["opt", "2*opt"]

[output]
name = "fig5"
""",
    "fig6": """\
scenario = "siv-sweep"
title = "Optimized detuning of a four-level node with enforced phase encoding"

[node]
model = "four-level"
C = 1.0
kappa = 100.0
zeta = 10.0
kappa1_ratio = "phase"

[sweep]
parameter = "node.C"
start = 1.0
stop = 40.0
points = 40

[maps]
omega_start = -100.0
omega_stop = 100.0
points = 801

[output]
name = "fig6"
""",
}


def format_value(v) -> str:
    """CSV cell: 17 significant digits for reals, 0/1 for booleans."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def write_csv(path: Path, header: str, rows: list[dict]) -> None:
    columns: list[str] = []
    for row in rows:
        for k in row:
            if k not in columns:
                columns.append(k)
    lines = [header, ",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(row.get(c, math.nan)) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def derived_constants(cfg: ScenarioConfig) -> dict:
    """Closed-form constants of the base node."""
    if cfg.scenario == "timedomain-check" and "random" in cfg.data:
        return {}
    node = node_from_block(cfg.data["node"], "node")
    out: dict = {}
    if isinstance(node, FourLevelConfig):
        gamma = node.base.transitions[0].gamma
        out.update(
            {
                "C": node.cooperativity,
                "kappa": node.base.kappa,
                "gamma": gamma,
                "zeta": node.zeta,
                "threshold_cooperativity": math.sqrt(1 + (node.zeta / gamma) ** 2),
            }
        )
        return out
    node = as_node(node)
    C, gamma = node.cooperativity(0), node.transitions[0].gamma
    out.update({"C": C, "kappa": node.kappa, "kappa1": node.kappa1, "kappa2": node.kappa2, "gamma": gamma})
    if node.is_three_level and C > 0:
        rho = node.coupling_ratio
        out.update(
            {
                "kappa_opt": optimal_kappa(C, gamma),
                "phase_encoding_ratio": phase_encoding_ratio(C),
                "resonant_r_minus_sq": (rho * C / (C + 1)) ** 2,
            }
        )
    return out


def build_jobs(cfg: ScenarioConfig, grid_points: int | None, seed: int) -> list[Job]:
    """Expand scan x sweep into jobs in output order (scan outer, sweep inner)."""
    param, values = cfg.sweep_values()
    base_dir = str(Path(cfg.source).parent)
    if cfg.scenario == "timedomain-check" and "random" in cfg.data:
        s = seed if seed is not None else int(cfg.data["random"].get("seed", 0))
        return [Job(cfg.data, base_dir, grid_points, seed=s)]
    jobs = []
    for point in cfg.scan_points():
        if param == "omega":
            jobs.append(Job(with_values(cfg.data, point), base_dir, grid_points, omega=values, index=len(jobs)))
            continue
        for v in values:
            pv = dict(point)
            if param is not None:
                pv[param] = float(v)
            jobs.append(Job(with_values(cfg.data, pv), base_dir, grid_points, index=len(jobs)))
    return jobs


def _execute(args) -> JobResult:
    scenario, job = args
    return run_job(scenario, job)


def run_scenario(
    config_path: str | Path,
    out_dir: str | Path = ".",
    grid_points: int | None = None,
    seed: int | None = None,
    jobs: int = 1,
    stderr=None,
) -> int:
    """Run one configuration file and write its CSV and JSON summary.

    Args:
        config_path: TOML configuration.
        out_dir: Output directory (created if missing).
        grid_points: Quadrature point count override.
        seed: Seed for randomized scenarios (overrides ``[random].seed``).
        jobs: Worker processes for the sweep points.
        stderr: Stream for error messages (default ``sys.stderr``).

    Returns:
        Exit code: 0 success, 2 configuration error, 3 not converged.
    """
    err = sys.stderr if stderr is None else stderr
    try:
        cfg = load_config(config_path)
        if grid_points is not None and grid_points < 2:
            raise ConfigError("--grid-points", f"must be >= 2, got {grid_points}")
        work = build_jobs(cfg, grid_points, seed)
        derived = derived_constants(cfg)
        tasks = [(cfg.scenario, j) for j in work]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_execute, tasks))
        else:
            results = [_execute(t) for t in tasks]
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except (NonPhysicalParameter, PreconditionViolated) as exc:
        field = getattr(exc, "field", "config")
        print(f"config error: {field}: {exc}", file=err)
        return EXIT_CONFIG
    except GridTooNarrow as exc:
        print(f"config error: --grid-points: {exc}", file=err)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: file: {exc}", file=err)
        return EXIT_CONFIG

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.name
    header = f"# cqedlink {__version__} scenario={cfg.scenario} name={name} config_sha256={cfg.sha256}"
    if grid_points is not None:
        header += f" grid_points={grid_points}"
    if cfg.scenario == "timedomain-check" and "random" in cfg.data:
        header += f" seed={work[0].seed}"
    rows = [r for res in results for r in res.rows]
    write_csv(out / f"{name}.csv", header, rows)
    files = [f"{name}.csv"]
    maps = [r for res in results for r in res.maps]
    if maps:
        write_csv(out / f"{name}_maps.csv", header, maps)
        files.append(f"{name}_maps.csv")
    converged = all(res.converged for res in results)
    summary = {
        "schema": SUMMARY_SCHEMA,
        "version": __version__,
        "scenario": cfg.scenario,
        "name": name,
        "title": cfg.data.get("title", ""),
        "config_sha256": cfg.sha256,
        "grid_points": grid_points,
        "seed": work[0].seed if cfg.scenario == "timedomain-check" and "random" in cfg.data else None,
        "rows": len(rows),
        "outputs": files,
        "derived": derived,
        "optima": [o for res in results for o in res.optima],
        "converged": converged,
        "failures": [f for res in results for f in res.failures],
    }
    (out / f"{name}.summary.json").write_text(
        json.dumps(_json_value(summary), sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8"
    )
    if not converged:
        print(f"not converged: {'; '.join(summary['failures'])}", file=err)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def emit_figure_bundle(which: str, out_dir: str | Path = ".", grid_points: int | None = None, jobs: int = 1) -> int:
    """Write the canned configuration for ``which`` to ``out_dir`` and run it.

    Returns:
        Exit code of the run.
    """
    if which not in FIGURE_CONFIGS:
        raise ValueError(f"unknown figure {which!r}; choose from {sorted(FIGURE_CONFIGS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{which}.toml"
    path.write_text(FIGURE_CONFIGS[which], encoding="utf-8")
    return run_scenario(path, out, grid_points=grid_points, jobs=jobs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqedlink", description="Scenario runner for conditional-reflection entanglement.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--grid-points", type=int, default=None, help="quadrature points per spectrum")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized scenarios")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")

    run = sub.add_parser("run", help="run a scenario configuration file")
    run.add_argument("config", help="TOML configuration")
    common(run)
    fig = sub.add_parser("figures", help="emit the data of a canned figure bundle")
    fig.add_argument("which", choices=sorted(FIGURE_CONFIGS))
    common(fig)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return run_scenario(args.config, args.out, args.grid_points, args.seed, args.jobs)
    return emit_figure_bundle(args.which, args.out, args.grid_points, args.jobs)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
