"""Scenario files, runs, sweeps and their output files.

Loads a JSON scenario, validates it against the stability-analysis
inequalities, runs the engine and writes the CSV/JSON/Markdown outputs.
Used by the CLI (gps_dwell_sim.py) and by tests.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

import numpy as np
from jinja2 import Environment, FileSystemLoader

from control import GainSet
from dynamics import (
    DesiredTrajectory,
    RegressorTerm,
    SystemModel,
    benchmark_model,
    custom_model,
    lipschitz_bounds,
)
from engine import (
    DIAGNOSTIC_COLUMNS,
    VARIANTS,
    EngineConfig,
    LearningSettings,
    SimTrace,
    run,
    stack_dump_columns,
    trace_columns,
)
from errors import ConfigError, ConfigValidationError, InvalidInputError, SimulationError
from estimator import EstimatorConfig, empirical_k_xi
from scheduler import AnalysisConstants, build_constants

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"
DEFAULT_OUTPUT_DIR = "gps_dwell_output"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_SAFETY = 3

SWITCH_COLUMNS = ["sigma", "kind", "t", "V", "theta_bound", "budget"]
DWELL_COLUMNS = ["sigma", "denied_budget"]
SWEEP_COLUMNS = [
    "parameter",
    "value",
    "final_theta_tilde_norm",
    "denied_intervals",
    "mean_denied_budget",
    "max_denied_budget",
    "max_V",
    "status",
    "output_dir",
]


# ---------------------------------------------------------------------------
# Configuration sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    kind: str = "benchmark"
    theta: tuple[float, ...] = (1.0, 0.5)
    d_bar: float = 1.5
    box: float = 3.0
    grid_points: int = 41
    drift_matrix: tuple[tuple[float, ...], ...] | None = None
    regressor_terms: tuple[RegressorTerm, ...] = ()


@dataclass(frozen=True)
class TrajectoryConfig:
    amplitude: float = 1.0
    frequency: float = 2.0


@dataclass(frozen=True)
class GainConfig:
    """``k1``/``k2`` are diagonals or full matrices."""

    k1: tuple = (5.0, 5.0)
    k2: tuple = (10.0, 10.0)
    epsilon: float = 1e-3
    pure_sign: bool = False


@dataclass(frozen=True)
class EstimatorSettings:
    gamma: tuple = (4.0, 4.0)
    k_theta: float = 5.0
    N: int = 20
    lambda_bar: float = 0.04
    lambda_y: float | None = None
    window: float = 0.25
    beta: float = 4.0
    alpha: float = 0.1
    variant: str = "cl"
    theta_bar: float = 1.5
    theta_hat0: tuple[float, ...] | None = None
    k_xi: float = 1.0


@dataclass(frozen=True)
class SchedulerConfig:
    V_l: float = 0.05
    V_u: float = 4.0
    eta: float = 3.0
    available_floor: float = 3.0
    denied_scale: float = 1.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = DEFAULT_OUTPUT_DIR
    stack_dump: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    gains: GainConfig = field(default_factory=GainConfig)
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)


SECTIONS: dict[str, type] = {
    "model": ModelConfig,
    "trajectory": TrajectoryConfig,
    "gains": GainConfig,
    "estimator": EstimatorSettings,
    "scheduler": SchedulerConfig,
    "engine": EngineConfig,
    "outputs": OutputConfig,
}


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _number(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, f"must be finite, got {value!r}")
    return float(value)


def _integer(path: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _whole(path: str, value: Any) -> int:
    # Sweep values arrive as floats from the command line; 20.0 is fine, 20.5 is not.
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return _integer(path, value)


def _flag(path: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true or false, got {value!r}")
    return value


def _text(path: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    return value


def _vector(path: str, value: Any) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, f"expected a non-empty list of numbers, got {value!r}")
    return tuple(_number(f"{path}[{i}]", v) for i, v in enumerate(value))


def _diag_or_matrix(path: str, value: Any) -> tuple:
    if isinstance(value, (list, tuple)) and value and isinstance(value[0], (list, tuple)):
        rows = tuple(_vector(f"{path}[{i}]", row) for i, row in enumerate(value))
        if any(len(row) != len(rows) for row in rows):
            raise ConfigError(path, "matrix must be square")
        return rows
    return _vector(path, value)


def _optional(convert: Callable[[str, Any], Any]) -> Callable[[str, Any], Any]:
    def wrapped(path: str, value: Any) -> Any:
        return None if value is None else convert(path, value)
    return wrapped


def _regressor_terms(path: str, value: Any) -> tuple[RegressorTerm, ...]:
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of {row, col, state, power, coeff} objects")
    terms = []
    for i, item in enumerate(value):
        item_path = f"{path}[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(item_path, "expected an object")
        unknown = set(item) - {"row", "col", "state", "power", "coeff"}
        if unknown:
            raise ConfigError(f"{item_path}.{sorted(unknown)[0]}", "unknown key")
        try:
            terms.append(RegressorTerm(
                row=_integer(f"{item_path}.row", item["row"]),
                col=_integer(f"{item_path}.col", item["col"]),
                state=_integer(f"{item_path}.state", item["state"]),
                power=_integer(f"{item_path}.power", item["power"]),
                coeff=_number(f"{item_path}.coeff", item.get("coeff", 1.0)),
            ))
        except KeyError as e:
            raise ConfigError(f"{item_path}.{e.args[0]}", "missing required key") from None
    return tuple(terms)


def _matrix(path: str, value: Any) -> tuple[tuple[float, ...], ...]:
    rows = _diag_or_matrix(path, value)
    if not rows or not isinstance(rows[0], tuple):
        raise ConfigError(path, "expected a square matrix (list of rows)")
    return rows


def _choice(*options: str) -> Callable[[str, Any], str]:
    def convert(path: str, value: Any) -> str:
        text = _text(path, value)
        if text not in options:
            raise ConfigError(path, f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return convert


# Sweep parameter -> (section, field, converter)
SWEEPABLE: dict[str, tuple[str, str, Callable[[str, Any], Any]]] = {
    "d_bar": ("model", "d_bar", _number),
    "k_theta": ("estimator", "k_theta", _number),
    "N": ("estimator", "N", _whole),
    "lambda_bar": ("estimator", "lambda_bar", _number),
    "V_u": ("scheduler", "V_u", _number),
}


CONVERTERS: dict[str, dict[str, Callable[[str, Any], Any]]] = {
    "model": {
        "kind": _choice("benchmark", "custom"),
        "theta": _vector,
        "d_bar": _number,
        "box": _number,
        "grid_points": _integer,
        "drift_matrix": _optional(_matrix),
        "regressor_terms": _regressor_terms,
    },
    "trajectory": {"amplitude": _number, "frequency": _number},
    "gains": {"k1": _diag_or_matrix, "k2": _diag_or_matrix, "epsilon": _number, "pure_sign": _flag},
    "estimator": {
        "gamma": _diag_or_matrix,
        "k_theta": _number,
        "N": _integer,
        "lambda_bar": _number,
        "lambda_y": _optional(_number),
        "window": _number,
        "beta": _number,
        "alpha": _number,
        "variant": _choice(*VARIANTS),
        "theta_bar": _number,
        "theta_hat0": _optional(_vector),
        "k_xi": _number,
    },
    "scheduler": {
        "V_l": _number,
        "V_u": _number,
        "eta": _number,
        "available_floor": _number,
        "denied_scale": _number,
    },
    "engine": {
        "h": _number,
        "t_end": _number,
        "seed": _integer,
        "hold_step": _number,
        "record_stride": _integer,
        "x0": _vector,
        "xhat0": _optional(_vector),
    },
    "outputs": {"directory": _text, "stack_dump": _flag},
}


def _build_section(name: str, data: Any) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(name, f"expected an object, got {type(data).__name__}")
    converters = CONVERTERS[name]
    values = {}
    for key, raw in data.items():
        if key not in converters:
            raise ConfigError(f"{name}.{key}", "unknown key")
        values[key] = converters[key](f"{name}.{key}", raw)
    try:
        return SECTIONS[name](**values)
    except InvalidInputError as e:
        raise ConfigError(name, str(e)) from None


def config_from_dict(data: Any) -> ScenarioConfig:
    """Build a ``ScenarioConfig`` from parsed JSON, filling defaults.

    Raises:
        ConfigError: On unknown keys or wrongly typed values; ``field``
            holds the dotted path.
    """
    if not isinstance(data, dict):
        raise ConfigError("<root>", "scenario must be a JSON object")
    for key in data:
        if key not in SECTIONS:
            raise ConfigError(key, "unknown section")
    return ScenarioConfig(**{name: _build_section(name, data[name]) for name in data})


def load_scenario(path: str) -> dict:
    """Load a scenario JSON file.

    Raises:
        FileNotFoundError: If the file at *path* does not exist.
        json.JSONDecodeError: If the file contains invalid JSON.
    """
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def parse_config(path: str) -> ScenarioConfig:
    """Load, parse and validate the scenario at *path*.

    Omitted fields take the benchmark defaults.

    Raises:
        FileNotFoundError: If the file does not exist.
        json.JSONDecodeError: If the file is not valid JSON.
        ConfigError: On schema violations.
        ConfigValidationError: If an analysis inequality fails.
    """
    cfg = config_from_dict(load_scenario(path))
    validate_config(cfg)
    return cfg


def _plain(value: Any) -> Any:
    if isinstance(value, RegressorTerm):
        return dataclasses.asdict(value)
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def serialize_config(cfg: ScenarioConfig) -> dict:
    """Plain-JSON form of *cfg*; ``config_from_dict`` inverts it."""
    return {
        name: {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(section)}
        for name, section in ((name, getattr(cfg, name)) for name in SECTIONS)
    }


def with_overrides(
    cfg: ScenarioConfig,
    seed: int | None = None,
    out: str | None = None,
    variant: str | None = None,
) -> ScenarioConfig:
    """Apply command-line overrides."""
    if seed is not None:
        cfg = dataclasses.replace(cfg, engine=dataclasses.replace(cfg.engine, seed=seed))
    if out is not None:
        cfg = dataclasses.replace(cfg, outputs=dataclasses.replace(cfg.outputs, directory=out))
    if variant is not None:
        if variant not in VARIANTS:
            raise ConfigError("estimator.variant", f"expected one of {', '.join(VARIANTS)}")
        cfg = dataclasses.replace(cfg, estimator=dataclasses.replace(cfg.estimator, variant=variant))
    return cfg


# ---------------------------------------------------------------------------
# Bundle construction and validation
# ---------------------------------------------------------------------------

@dataclass
class SimulationBundle:
    """Everything ``engine.run`` needs, built from one ``ScenarioConfig``."""

    model: SystemModel
    trajectory: DesiredTrajectory
    est_cfg: EstimatorConfig
    gains: GainSet
    consts: AnalysisConstants
    engine_cfg: EngineConfig
    variant: str
    settings: LearningSettings


def _build_model(model_cfg: ModelConfig) -> SystemModel:
    if model_cfg.kind == "benchmark":
        if len(model_cfg.theta) != 2:
            raise ConfigValidationError("model.theta", "the benchmark has two parameters")
        return benchmark_model(model_cfg.theta, model_cfg.d_bar)
    if model_cfg.drift_matrix is None:
        raise ConfigValidationError("model.drift_matrix", "required for a custom model")
    try:
        return custom_model(model_cfg.drift_matrix, model_cfg.regressor_terms,
                            model_cfg.theta, model_cfg.d_bar)
    except InvalidInputError as e:
        raise ConfigValidationError("model", str(e)) from None


@lru_cache(maxsize=32)
def _lipschitz_for(model_cfg: ModelConfig) -> tuple[float, float, float]:
    # theta and d_bar do not enter the bounds; callers pass a normalized key.
    return lipschitz_bounds(_build_model(model_cfg), model_cfg.box, model_cfg.grid_points)


def analysis_bounds(model_cfg: ModelConfig) -> tuple[float, float, float]:
    """``(L_f, L_Y, Y_bar)`` for *model_cfg*, cached per model shape."""
    key = dataclasses.replace(model_cfg, d_bar=0.0, theta=tuple(0.0 for _ in model_cfg.theta))
    try:
        return _lipschitz_for(key)
    except InvalidInputError as e:
        raise ConfigValidationError("model.box", str(e)) from None


def _square(path: str, value: tuple, size: int) -> np.ndarray:
    matrix = np.diag(value) if value and not isinstance(value[0], tuple) else np.array(value, dtype=float)
    if matrix.shape != (size, size):
        raise ConfigValidationError(path, f"must be {size}x{size} (or a length-{size} diagonal)")
    return matrix


def build_bundle(cfg: ScenarioConfig) -> SimulationBundle:
    """Instantiate and validate the simulation objects for *cfg*.

    Raises:
        ConfigValidationError: Naming the violated inequality or the field
            whose dimensions disagree with the model.
    """
    model = _build_model(cfg.model)
    n, p = model.n, model.p
    est, sch, eng = cfg.estimator, cfg.scheduler, cfg.engine

    k1 = _square("gains.k1", cfg.gains.k1, n)
    k2 = _square("gains.k2", cfg.gains.k2, n)
    gamma = _square("estimator.gamma", est.gamma, p)
    if not np.allclose(gamma, gamma.T) or np.linalg.eigvalsh(0.5 * (gamma + gamma.T))[0] <= 0:
        raise ConfigValidationError("estimator.gamma", "Gamma must be symmetric positive definite")
    if len(eng.x0) != n or (eng.xhat0 is not None and len(eng.xhat0) != n):
        raise ConfigValidationError("engine.x0", f"initial states must have {n} entries")
    theta_hat0 = np.zeros(p) if est.theta_hat0 is None else np.asarray(est.theta_hat0)
    if theta_hat0.size != p:
        raise ConfigValidationError("estimator.theta_hat0", f"must have {p} entries")
    if sch.V_u >= 0.5 * sch.eta**2:
        raise ConfigValidationError("scheduler.V_u", "V_u < eta^2/2 is violated")
    if not 0 < sch.V_l < sch.V_u:
        raise ConfigValidationError("scheduler.V_l", "0 < V_l < V_u is violated")
    if sch.available_floor < 0 or sch.denied_scale <= 0:
        raise ConfigValidationError("scheduler", "available_floor must be >= 0 and denied_scale > 0")
    if est.N < 1 or est.lambda_bar < 0 or est.k_theta <= 0:
        raise ConfigValidationError("estimator", "need N >= 1, lambda_bar >= 0 and k_theta > 0")
    if est.lambda_y is not None and est.lambda_y <= 0:
        raise ConfigValidationError("estimator.lambda_y", "must be positive")

    try:
        gains = GainSet(k1, k2, cfg.gains.epsilon, cfg.gains.pure_sign)
        trajectory = DesiredTrajectory(n, cfg.trajectory.amplitude, cfg.trajectory.frequency)
        est_cfg = EstimatorConfig(est.k_theta, gamma, theta_hat0, est.theta_bar, est.k_xi)
        settings = LearningSettings(
            capacity=est.N,
            lambda_bar=est.lambda_bar,
            lambda_y=est.lambda_y,
            window=est.window,
            beta=est.beta,
            alpha=est.alpha,
            available_floor=sch.available_floor,
            denied_scale=sch.denied_scale,
            stack_dump=cfg.outputs.stack_dump,
        )
    except InvalidInputError as e:
        raise ConfigValidationError("scenario", str(e)) from None

    L_f, L_Y, Y_bar = analysis_bounds(cfg.model)
    if gains.k1_min <= L_f:
        raise ConfigValidationError(
            "gains.k1", f"lambda_min(k1) must exceed L_f ({gains.k1_min:.4g} <= {L_f:.4g})"
        )
    consts = build_constants(L_f, L_Y, Y_bar, model.d_bar, gains.k1_min, gains.k2_min,
                             sch.V_l, sch.V_u, sch.eta)
    return SimulationBundle(model, trajectory, est_cfg, gains, consts, eng, est.variant, settings)


def validate_config(cfg: ScenarioConfig) -> None:
    """Raise ``ConfigValidationError`` if *cfg* cannot be simulated."""
    build_bundle(cfg)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    trace: SimTrace
    summary: dict[str, Any]
    output_dir: str | None

    @property
    def status(self) -> int:
        return EXIT_OK if self.trace.safety_ok else EXIT_SAFETY


def summarize(trace: SimTrace, bundle: SimulationBundle) -> dict[str, Any]:
    """Compute the run summary written to summary.json and the README.

    Args:
        trace: Output of ``engine.run``.
        bundle: The bundle that produced it.

    Returns:
        Dict with the final and initial ``||theta~||``, GPS-denied interval
        count and budgets, ``max V`` and the safety verdict, the bound
        history, excitation times and the empirical ``k_xi``.
    """
    p = bundle.model.p
    theta_true = bundle.model.theta_true
    initial = float(np.linalg.norm(theta_true - bundle.est_cfg.theta_hat0))
    final = initial
    if trace.records:
        final = float(np.linalg.norm(trace.vectors("thetatilde", p)[-1]))
    budgets = trace.denied_budgets
    completed = sum(1 for s in trace.switches if s.kind.value == "available" and s.sigma > 0)
    xi_norms = [row["xi_sigma_norm"] for row in trace.diagnostics]
    return {
        "model": bundle.model.name,
        "variant": bundle.variant,
        "seed": bundle.engine_cfg.seed,
        "t_end": bundle.engine_cfg.t_end,
        "h": bundle.engine_cfg.h,
        "records": len(trace.records),
        "L_f": bundle.consts.L_f,
        "L_Y": bundle.consts.L_Y,
        "Y_bar": bundle.consts.Y_bar,
        "initial_theta_tilde_norm": initial,
        "final_theta_tilde_norm": final,
        "denied_intervals": completed,
        "denied_budgets": budgets,
        "mean_denied_budget": float(np.mean(budgets)) if budgets else 0.0,
        "max_denied_budget": max(budgets) if budgets else 0.0,
        "max_V": trace.max_V,
        "V_u": bundle.consts.V_u,
        "safety_ok": trace.safety_ok,
        "theta_bounds": [bound for _, _, bound in _bound_history(trace)],
        "excitation_times": [t for _, t in trace.excitation_times],
        "configured_k_xi": bundle.est_cfg.k_xi,
        "empirical_k_xi": empirical_k_xi(xi_norms, bundle.model.d_bar),
        "status": EXIT_OK if trace.safety_ok else EXIT_SAFETY,
    }


def _bound_history(trace: SimTrace) -> list[tuple[int, float, float]]:
    return [(s.sigma, s.t, s.theta_bound) for s in trace.switches if s.kind.value == "denied"]


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def render_report(summary: dict[str, Any], trace: SimTrace) -> str:
    """Render the per-run README.md from templates/run_report.md.j2."""
    env = Environment(loader=FileSystemLoader(TEMPLATES_DIR), keep_trailing_newline=True)
    template = env.get_template("run_report.md.j2")
    return template.render(
        summary=summary,
        switches=[s.as_row() for s in trace.switches],
        dwell=trace.dwell,
        n=trace.n,
        p=trace.p,
    )


def save_run_files(
    trace: SimTrace,
    summary: dict[str, Any],
    cfg: ScenarioConfig,
    output_dir: str,
) -> list[str]:
    """Write every output file of one run to *output_dir*.

    Creates the directory if needed and writes trace.csv, switches.csv,
    dwell.csv, diagnostics.csv, summary.json, config.json and README.md,
    plus stack_dump.csv when ``outputs.stack_dump`` is set.  Runs with
    ``t_end = 0`` produce header-only CSVs.

    Returns:
        Paths of the files written.
    """
    os.makedirs(output_dir, exist_ok=True)
    written = []

    def target(name: str) -> str:
        path = os.path.join(output_dir, name)
        written.append(path)
        return path

    _write_csv(target("trace.csv"), trace_columns(trace.n, trace.p), trace.records)
    _write_csv(target("switches.csv"), SWITCH_COLUMNS, [s.as_row() for s in trace.switches])
    _write_csv(target("dwell.csv"), DWELL_COLUMNS, trace.dwell)
    _write_csv(target("diagnostics.csv"), DIAGNOSTIC_COLUMNS, trace.diagnostics)
    if cfg.outputs.stack_dump:
        _write_csv(target("stack_dump.csv"), stack_dump_columns(trace.n, trace.p), trace.stack_dump)

    with open(target("summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
    with open(target("config.json"), "w") as f:
        json.dump(serialize_config(cfg), f, indent=2)
    with open(target("README.md"), "w") as f:
        f.write(render_report(summary, trace))

    logger.info("wrote %d files to %s", len(written), output_dir)
    return written


def run_scenario(cfg: ScenarioConfig, output_dir: str | None = None, write: bool = True) -> RunResult:
    """Run *cfg* and write its output files.

    Args:
        cfg: Parsed scenario.
        output_dir: Overrides ``cfg.outputs.directory``.
        write: Skip file output when False.

    Returns:
        A ``RunResult``; its ``status`` is 0, or 3 if the safety monitor
        tripped.

    Raises:
        ConfigValidationError: If *cfg* fails validation.
        NumericalBlowupError: If the integration diverges.
        InfeasibleStartError: If a GPS-denied interval would start above V_u.
    """
    bundle = build_bundle(cfg)
    trace = run(
        bundle.model,
        bundle.trajectory,
        bundle.est_cfg,
        bundle.gains,
        bundle.consts,
        bundle.engine_cfg,
        bundle.variant,
        bundle.settings,
    )
    summary = summarize(trace, bundle)
    directory = output_dir or cfg.outputs.directory
    if write:
        save_run_files(trace, summary, cfg, directory)
    return RunResult(trace, summary, directory if write else None)


def print_run_report(summary: dict[str, Any], output_dir: str | None = None) -> None:
    """Print the run summary to stdout."""
    print(f"\n{'=' * 60}")
    print("GPS Dwell-Time Simulation Summary")
    print(f"{'=' * 60}")
    print(f"Model: {summary['model']}  Variant: {summary['variant']}  Seed: {summary['seed']}")
    print(f"Horizon: {summary['t_end']:.2f} s at h = {summary['h']:g} s ({summary['records']:,} records)")
    print(f"L_f = {summary['L_f']:.4g}  L_Y = {summary['L_Y']:.4g}  Y_bar = {summary['Y_bar']:.4g}")
    print(
        f"||theta~||: {summary['initial_theta_tilde_norm']:.4f} -> "
        f"{summary['final_theta_tilde_norm']:.4f}"
    )

    budgets = summary["denied_budgets"]
    if budgets:
        print(f"\nGPS-denied budgets ({summary['denied_intervals']} completed):")
        for sigma, budget in enumerate(budgets):
            print(f"  sigma={sigma}: {budget:.3f} s")
        print(f"Mean / Max: {summary['mean_denied_budget']:.3f} s / {summary['max_denied_budget']:.3f} s")

    verdict = "OK" if summary["safety_ok"] else "VIOLATED"
    print(f"\nmax V = {summary['max_V']:.4f} (V_u = {summary['V_u']:g}): {verdict}")
    print(f"k_xi: configured {summary['configured_k_xi']:g}, empirical {summary['empirical_k_xi']:.4f}")
    print(f"{'=' * 60}")
    if output_dir:
        print(f"\nOutputs have been saved to the '{output_dir}' directory:")
        print("1. trace.csv - States, estimates, errors and V at the record stride")
        print("2. switches.csv / dwell.csv - Phase switches and GPS-denied budgets")
        print("3. diagnostics.csv - Excitation and residual diagnostics")
        print("4. README.md - Column guide and run summary")


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def with_parameter(cfg: ScenarioConfig, parameter: str, value: Any) -> ScenarioConfig:
    """Return *cfg* with the sweepable *parameter* set to *value*.

    Raises:
        ConfigError: If *parameter* is not sweepable or *value* does not
            convert, e.g. a non-integral ``N``.
    """
    if parameter not in SWEEPABLE:
        raise ConfigError(
            f"sweep.{parameter}", f"not sweepable; choose one of {', '.join(SWEEPABLE)}"
        )
    section_name, field_name, convert = SWEEPABLE[parameter]
    converted = convert(f"sweep.{parameter}", value)
    section = dataclasses.replace(getattr(cfg, section_name), **{field_name: converted})
    return dataclasses.replace(cfg, **{section_name: section})


def _sweep_one(job: tuple[ScenarioConfig, str, Any, str]) -> dict[str, Any]:
    cfg, parameter, value, directory = job
    row = {"parameter": parameter, "value": value, "output_dir": directory}
    try:
        result = run_scenario(cfg, directory)
    except SimulationError as e:
        logger.error("sweep %s=%s failed: %s", parameter, value, e)
        status = EXIT_CONFIG if isinstance(e, ConfigError) else EXIT_NUMERICAL
        row.update({
            "final_theta_tilde_norm": "",
            "denied_intervals": "",
            "mean_denied_budget": "",
            "max_denied_budget": "",
            "max_V": "",
            "status": status,
        })
        return row
    summary = result.summary
    row.update({key: summary[key] for key in (
        "final_theta_tilde_norm", "denied_intervals", "mean_denied_budget", "max_denied_budget", "max_V",
    )})
    row["status"] = result.status
    return row


def run_sweep(
    cfg: ScenarioConfig,
    parameter: str,
    values: list[Any],
    jobs: int = 1,
    output_dir: str | None = None,
) -> list[dict[str, Any]]:
    """Run *cfg* once per value of *parameter* and write sweep_summary.csv.

    Each value runs in its own sub-directory ``<parameter>_<value>``.  With
    ``jobs > 1`` the runs execute in a process pool.

    Returns:
        One summary row per value, in the order given.

    Raises:
        ConfigError: If *parameter* is not sweepable or a value does not
            produce a valid scenario.
    """
    root = output_dir or cfg.outputs.directory
    jobs_list = []
    for value in values:
        variant_cfg = with_parameter(cfg, parameter, value)
        validate_config(variant_cfg)
        jobs_list.append((variant_cfg, parameter, value, os.path.join(root, f"{parameter}_{value}")))

    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs_list))
    else:
        rows = [_sweep_one(job) for job in jobs_list]

    os.makedirs(root, exist_ok=True)
    _write_csv(os.path.join(root, "sweep_summary.csv"), SWEEP_COLUMNS, rows)
    logger.info("sweep over %s: %d runs written to %s", parameter, len(rows), root)
    return rows
