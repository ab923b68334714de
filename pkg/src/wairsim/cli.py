"""Command-line front end: configured runs, parameter sweeps, verification.

Subcommands:

* ``run <config.json>``    -- one simulation, CSV log plus key=value summary
* ``sweep <config.json>``  -- cartesian product over swept parameters
* ``verify <suite>``       -- randomized verification suites with pass/fail table

Configuration is strict JSON (an empty file means all defaults); angles
are degrees at this surface and radians inside the library.  Exit codes:
0 success, 1 verification failure, 2 configuration error, 3 infeasible
run, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mpc import FrictionMode, MpcConfig
from .simulate import (
    ReferenceSpec,
    SimConfig,
    SimLog,
    default_sim_config,
    run as run_simulation,
)
from .verify import SUITES
from .vlip import LinearizationMode, VlipState
from . import vlip as _vlip  # noqa: F401  (re-exported for config docs)

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "parse_config",
    "spec_from_dict",
    "run_experiment",
    "verify",
    "write_csv",
    "main",
    "entry",
    "CSV_HEADER",
    "EXIT_OK",
    "EXIT_VERIFY_FAILED",
    "EXIT_CONFIG_ERROR",
    "EXIT_INFEASIBLE",
    "EXIT_IO_ERROR",
]

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_IO_ERROR = 4

CSV_HEADER = ("t,x_com,xdot_com,x_cop,lambda_x,lambda_y,F_x,F_y,"
              "x_ref,xdot_ref,world_X,world_Y,qp_iters,qp_solve_us,qp_status")

_TOP_KEYS = {"scenario", "seed", "output_dir", "sim", "sweep"}
_SIM_KEYS = {
    "duration_s", "sim_dt_s", "mpc_period_s", "slope_deg", "cop_stride_m",
    "mass_kg", "com_height_m", "gravity_m_s2", "initial_x_m",
    "initial_xdot_m_s", "initial_x_cop_m", "initial_lambda_y_n",
    "linearization", "reference", "mpc",
}
_REFERENCE_KEYS = {"cruise_speed_m_s", "step_time_s", "step_velocity_m_s"}
_MPC_KEYS = {
    "horizon", "dt_s", "q_position", "q_velocity", "u_min_n", "u_max_n",
    "mu_s", "lambda_min_n", "friction",
}
_SCHEMA = {
    "scenario": None, "seed": None, "output_dir": None, "sweep": None,
    "sim": {
        **{k: None for k in _SIM_KEYS - {"reference", "mpc"}},
        "reference": {k: None for k in _REFERENCE_KEYS},
        "mpc": {k: None for k in _MPC_KEYS},
    },
}


class ConfigError(Exception):
    """Invalid experiment configuration; message carries the field path."""


@dataclass
class ExperimentSpec:
    scenario: str
    sim: SimConfig
    sweep: list[tuple[str, list]] = field(default_factory=list)
    output_dir: Path = Path("runs")
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.scenario:
            raise ConfigError("scenario name must be non-empty")


def _expect_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _expect_pair(value, path):
    if (not isinstance(value, list) or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float))
                   for v in value)):
        raise ConfigError(f"{path}: expected a list of two numbers, got {value!r}")
    return (float(value[0]), float(value[1]))


def _check_keys(raw: dict, schema: dict, prefix: str, strict: bool):
    for key, value in raw.items():
        if key not in schema:
            full = f"{prefix}{key}"
            if strict:
                raise ConfigError(f"unknown configuration key '{full}'")
            print(f"warning: ignoring unknown configuration key '{full}'",
                  file=sys.stderr)
            continue
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{prefix}{key}: expected an object")
            _check_keys(value, sub, f"{prefix}{key}.", strict)


def _build_mpc(raw: dict) -> MpcConfig:
    friction_name = raw.get("friction", "one_sided")
    try:
        friction = FrictionMode(friction_name)
    except ValueError:
        raise ConfigError(
            f"sim.mpc.friction: unknown mode {friction_name!r}; "
            f"choose from {[m.value for m in FrictionMode]}") from None
    horizon = raw.get("horizon", 5)
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ConfigError("sim.mpc.horizon: expected an integer")
    try:
        return MpcConfig(
            horizon_nh=horizon,
            dt=_expect_number(raw.get("dt_s", 0.01), "sim.mpc.dt_s"),
            q_weight=(_expect_number(raw.get("q_position", 100.0),
                                     "sim.mpc.q_position"),
                      _expect_number(raw.get("q_velocity", 10.0),
                                     "sim.mpc.q_velocity")),
            u_min=_expect_pair(raw.get("u_min_n", [-200.0, -200.0]),
                               "sim.mpc.u_min_n"),
            u_max=_expect_pair(raw.get("u_max_n", [200.0, 200.0]),
                               "sim.mpc.u_max_n"),
            mu_s=_expect_number(raw.get("mu_s", 0.5), "sim.mpc.mu_s"),
            lambda_min_n=_expect_number(raw.get("lambda_min_n", 10.0),
                                        "sim.mpc.lambda_min_n"),
            friction_mode=friction,
        )
    except ValueError as exc:
        raise ConfigError(f"sim.mpc: {exc}") from None


def _build_sim(raw: dict) -> SimConfig:
    slope_deg = _expect_number(raw.get("slope_deg", 40.0), "sim.slope_deg")
    if abs(slope_deg) >= 90.0:
        raise ConfigError(f"sim.slope_deg: |angle| must be below 90, got {slope_deg}")
    ref_raw = raw.get("reference", {})
    try:
        reference = ReferenceSpec(
            cruise_speed=_expect_number(ref_raw.get("cruise_speed_m_s", 0.2),
                                        "sim.reference.cruise_speed_m_s"),
            step_time=_expect_number(ref_raw.get("step_time_s", 5.0),
                                     "sim.reference.step_time_s"),
            step_velocity=_expect_number(ref_raw.get("step_velocity_m_s", 0.4),
                                         "sim.reference.step_velocity_m_s"),
        )
    except ValueError as exc:
        raise ConfigError(f"sim.reference: {exc}") from None
    linearization_name = raw.get("linearization", "full_taylor")
    try:
        linearization = LinearizationMode(linearization_name)
    except ValueError:
        raise ConfigError(
            f"sim.linearization: unknown mode {linearization_name!r}; "
            f"choose from {[m.value for m in LinearizationMode]}") from None
    x_cop = raw.get("initial_x_cop_m")
    lambda_y = raw.get("initial_lambda_y_n")
    try:
        return default_sim_config(
            slope_alpha=math.radians(slope_deg),
            mass=_expect_number(raw.get("mass_kg", 8.0), "sim.mass_kg"),
            y0=_expect_number(raw.get("com_height_m", 0.45), "sim.com_height_m"),
            gravity=_expect_number(raw.get("gravity_m_s2", 9.81),
                                   "sim.gravity_m_s2"),
            duration=_expect_number(raw.get("duration_s", 10.0), "sim.duration_s"),
            sim_dt=_expect_number(raw.get("sim_dt_s", 0.001), "sim.sim_dt_s"),
            mpc_period=_expect_number(raw.get("mpc_period_s", 0.01),
                                      "sim.mpc_period_s"),
            cop_stride=_expect_number(raw.get("cop_stride_m", 0.1),
                                      "sim.cop_stride_m"),
            initial_state=VlipState(
                _expect_number(raw.get("initial_x_m", 0.0), "sim.initial_x_m"),
                _expect_number(raw.get("initial_xdot_m_s", 0.0),
                               "sim.initial_xdot_m_s")),
            initial_x_cop=None if x_cop is None
            else _expect_number(x_cop, "sim.initial_x_cop_m"),
            initial_lambda_y=None if lambda_y is None
            else _expect_number(lambda_y, "sim.initial_lambda_y_n"),
            linearization_mode=linearization,
            reference_spec=reference,
            mpc=_build_mpc(raw.get("mpc", {})),
        )
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from None


def _schema_has_path(path: str) -> bool:
    node = _SCHEMA
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return False
        node = node[part]
    return not isinstance(node, dict)


def _parse_sweep(raw) -> list[tuple[str, list]]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ConfigError("sweep: expected a list of {path, values} objects")
    entries = []
    for i, entry_raw in enumerate(raw):
        if (not isinstance(entry_raw, dict)
                or set(entry_raw) != {"path", "values"}):
            raise ConfigError(f"sweep[{i}]: expected keys 'path' and 'values'")
        path = entry_raw["path"]
        values = entry_raw["values"]
        if not isinstance(path, str) or not _schema_has_path(path):
            raise ConfigError(f"sweep[{i}].path: unresolvable parameter path {path!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep[{i}].values: expected a non-empty list")
        entries.append((path, values))
    return entries


def spec_from_dict(raw: dict, strict: bool = False) -> ExperimentSpec:
    """Validate a raw configuration mapping and build the experiment spec."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    _check_keys(raw, _SCHEMA, "", strict)
    scenario = raw.get("scenario", "wair")
    if not isinstance(scenario, str) or not scenario:
        raise ConfigError("scenario: expected a non-empty string")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    output_dir = raw.get("output_dir", "runs")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string path")
    sim = _build_sim(raw.get("sim", {}) or {})
    sweep = _parse_sweep(raw.get("sweep"))
    return ExperimentSpec(scenario=scenario, sim=sim, sweep=sweep,
                          output_dir=Path(output_dir), seed=seed, raw=raw)


def parse_config(path: str | Path, strict: bool = False) -> ExperimentSpec:
    """Load, validate and default-fill a JSON experiment configuration."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not text.strip():
        raw: dict = {}
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: malformed JSON at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}") from None
    return spec_from_dict(raw, strict=strict)


def _set_path(raw: dict, path: str, value):
    node = raw
    parts = path.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def materialize_runs(spec: ExperimentSpec) -> list[tuple[str, SimConfig]]:
    """Expand the sweep into named (run name, SimConfig) pairs."""
    if not spec.sweep:
        return [(spec.scenario, spec.sim)]
    runs = []
    paths = [p for p, _ in spec.sweep]
    for combo in itertools.product(*(vals for _, vals in spec.sweep)):
        raw = json.loads(json.dumps(spec.raw))  # deep copy of plain data
        raw.pop("sweep", None)
        tags = []
        for path, value in zip(paths, combo):
            _set_path(raw, path, value)
            tags.append(f"{path.rsplit('.', 1)[-1]}={value}")
        name = spec.scenario + "__" + "_".join(tags).replace("/", "-")
        runs.append((name, _build_sim(raw.get("sim", {}) or {})))
    return runs


def _fmt(value: float) -> str:
    return repr(float(value))


def write_csv(log: SimLog, path: Path):
    """Emit one row per simulation step using the fixed column schema."""
    with open(path, "w") as handle:
        handle.write(CSV_HEADER + "\n")
        for i in range(len(log)):
            row = [
                _fmt(log.t[i]), _fmt(log.x_com[i]), _fmt(log.xdot_com[i]),
                _fmt(log.x_cop[i]), _fmt(log.lambda_x[i]), _fmt(log.lambda_y[i]),
                _fmt(log.f_x[i]), _fmt(log.f_y[i]), _fmt(log.x_ref[i]),
                _fmt(log.xdot_ref[i]), _fmt(log.world_x[i]), _fmt(log.world_y[i]),
                str(int(log.qp_iterations[i])),
                _fmt(log.qp_solve_time[i] * 1e6),
                log.qp_status[i],
            ]
            handle.write(",".join(row) + "\n")


def summarize(log: SimLog, config: SimConfig) -> dict:
    """Tracking, constraint-slack, and solver statistics of one run."""
    out = {
        "termination": log.termination,
        "rows": len(log),
        "duration_s": config.duration,
        "slope_deg": math.degrees(config.slope_alpha),
    }
    if len(log) == 0:
        return out
    pos_err = log.x_com - log.x_ref
    vel_err = log.xdot_com - log.xdot_ref
    cone = log.lambda_x - config.mpc.mu_s * log.lambda_y
    floor = config.mpc.lambda_min_n - log.lambda_y
    solve_us = log.qp_solve_time * 1e6
    out.update({
        "rms_position_error_m": float(np.sqrt(np.mean(pos_err ** 2))),
        "rms_velocity_error_m_s": float(np.sqrt(np.mean(vel_err ** 2))),
        "mean_lambda_y_n": float(log.lambda_y.mean()),
        "max_cone_violation_n": float(np.maximum(cone, floor).max()),
        "min_cone_slack_n": float(-cone.max()),
        "solve_us_mean": float(solve_us.mean()),
        "solve_us_max": float(solve_us.max()),
        "solve_us_p50": float(np.percentile(solve_us, 50)),
        "solve_us_p90": float(np.percentile(solve_us, 90)),
        "solve_us_p99": float(np.percentile(solve_us, 99)),
        "qp_iters_mean": float(log.qp_iterations.mean()),
        "qp_iters_max": int(log.qp_iterations.max()),
    })
    return out


def _write_summary(summary: dict, path: Path):
    with open(path, "w") as handle:
        for key, value in summary.items():
            handle.write(f"{key}={value}\n")


def _execute_run(name: str, config: SimConfig, output_dir: Path) -> dict:
    log = run_simulation(config)
    write_csv(log, output_dir / f"{name}.csv")
    summary = {"scenario": name, **summarize(log, config)}
    _write_summary(summary, output_dir / f"{name}_summary.txt")
    return summary


def run_experiment(spec: ExperimentSpec, parallel: int = 1,
                   sweep_only: bool = False) -> int:
    """Execute the configured run(s); returns the process exit code."""
    runs = materialize_runs(spec)
    if sweep_only and not spec.sweep:
        raise ConfigError("sweep requested but the configuration has no sweep list")
    try:
        spec.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    summaries = []
    try:
        if parallel > 1 and len(runs) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
                futures = [pool.submit(_execute_run, name, config, spec.output_dir)
                           for name, config in runs]
                summaries = [f.result() for f in futures]
        else:
            summaries = [_execute_run(name, config, spec.output_dir)
                         for name, config in runs]
    except OSError as exc:
        print(f"error: I/O failure while writing results: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    status = EXIT_OK
    for summary in summaries:
        line = (f"{summary['scenario']}: {summary['termination']}, "
                f"{summary['rows']} rows")
        if "solve_us_mean" in summary:
            line += (f", mean solve {summary['solve_us_mean']:.1f} us, "
                     f"mean lambda_y {summary['mean_lambda_y_n']:.2f} N")
        print(line)
        if summary["termination"] != "completed":
            status = EXIT_INFEASIBLE
    return status


def verify(suite: str, seed: int = 0, output_dir: Path = Path("runs")) -> int:
    """Run one named verification suite and print its pass/fail table."""
    if suite not in SUITES:
        print(f"error: unknown suite '{suite}'; choose from {sorted(SUITES)}",
              file=sys.stderr)
        return EXIT_CONFIG_ERROR
    report = SUITES[suite](seed=seed)
    for check in report.checks:
        marker = "PASS" if check.passed else "FAIL"
        print(f"[{marker}] {report.suite}.{check.name}: {check.detail}")
    if report.passed:
        return EXIT_OK
    if report.failing_case is not None:
        try:
            output_dir.mkdir(parents=True, exist_ok=True)
            case_path = output_dir / f"verify_{suite}_failure.json"
            case_path.write_text(json.dumps(report.failing_case, indent=2))
            print(f"failing case serialized to {case_path}", file=sys.stderr)
        except OSError as exc:
            print(f"error: could not serialize failing case: {exc}",
                  file=sys.stderr)
            return EXIT_IO_ERROR
    return EXIT_VERIFY_FAILED


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wairsim",
        description="Slope-climbing force-control simulation and verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("config", help="JSON experiment configuration")
        p.add_argument("--output-dir", default=None,
                       help="override the configured output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured seed")
        p.add_argument("--parallel", type=int, default=1,
                       help="max concurrent sweep runs")
        p.add_argument("--strict-config", action="store_true",
                       help="reject unknown configuration keys")

    add_run_flags(sub.add_parser("run", help="execute one configured run"))
    add_run_flags(sub.add_parser("sweep", help="execute a parameter sweep"))

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=sorted(SUITES))
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--output-dir", default="runs",
                          help="where to serialize failing cases")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "verify":
        return verify(args.suite, seed=args.seed, output_dir=Path(args.output_dir))
    try:
        spec = parse_config(args.config, strict=args.strict_config)
        if args.output_dir is not None:
            spec.output_dir = Path(args.output_dir)
        if args.seed is not None:
            spec.seed = args.seed
        return run_experiment(spec, parallel=args.parallel,
                              sweep_only=args.command == "sweep")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
