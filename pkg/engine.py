"""Fixed-step simulation of the plant, observer, estimator and filters.

One call to ``run`` integrates the composite state with classical RK4 under
the phase signal produced by ``scheduler``.  Within a step the disturbance,
the phase and the aggregated information system are held constant.  The
trace is deterministic for a given seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

import aggregation
import signals
from control import (
    ErrorState,
    GainSet,
    control_input,
    errors,
    layer_stiffness,
    observer_rate,
    sliding_term,
)
from dynamics import DesiredTrajectory, DisturbanceGenerator, SystemModel
from errors import InvalidInputError, NotWarmError, NumericalBlowupError
from estimator import EstimatorConfig, ThetaBound, initial_bound, theta_rate
from scheduler import AnalysisConstants, Phase, SwitchRecord, advance_phase, initial_phase

logger = logging.getLogger(__name__)

# variant -> (filter realization, aggregation)
VARIANTS: dict[str, tuple[str, str]] = {
    "cl": (signals.WINDOWED, "stack"),
    "ew": (signals.WINDOWED, "ew"),
    "expfilter": (signals.EXPONENTIAL, "stack"),
}

SAFETY_MARGIN = 1e-3
MAX_STEP = 1e-2

RateFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EngineConfig:
    """Integration settings and initial conditions.

    Attributes:
        h: Fixed step in seconds, at most ``1e-2``.
        t_end: Horizon in seconds; zero gives an empty trace.
        record_stride: Steps between trace records and stack admissions.
        seed: Disturbance seed.
        hold_step: Disturbance sample-and-hold period, independent of ``h``.
        x0: Initial plant state.
        xhat0: Initial observer state; zeros when omitted.
    """

    h: float = 1e-3
    t_end: float = 9.0
    record_stride: int = 10
    seed: int = 0
    hold_step: float = 1e-3
    x0: tuple[float, ...] = (-1.0, 1.0)
    xhat0: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not 0 < self.h <= MAX_STEP:
            raise InvalidInputError(f"h must be in (0, {MAX_STEP}], got {self.h}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise InvalidInputError(f"t_end must be finite and nonnegative, got {self.t_end}")
        if self.record_stride < 1:
            raise InvalidInputError(f"record_stride must be positive, got {self.record_stride}")
        if not self.hold_step > 0:
            raise InvalidInputError(f"hold_step must be positive, got {self.hold_step}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.h))


@dataclass(frozen=True)
class LearningSettings:
    """Estimator-side settings that are not part of the update law itself."""

    capacity: int = 20
    lambda_bar: float = 0.04
    lambda_y: float | None = None
    window: float = 0.25
    beta: float = 4.0
    alpha: float = 0.1
    available_floor: float = 3.0
    denied_scale: float = 1.0
    stack_dump: bool = False

    @property
    def excitation_level(self) -> float:
        return self.lambda_bar if self.lambda_y is None else self.lambda_y


def trace_columns(n: int, p: int) -> list[str]:
    """Column order of trace rows."""
    cols = ["t"]
    for prefix in ("x", "xhat", "xd", "u"):
        cols += [f"{prefix}{i + 1}" for i in range(n)]
    for prefix in ("thetahat", "thetatilde"):
        cols += [f"{prefix}{j + 1}" for j in range(p)]
    for prefix in ("e1_", "e2_"):
        cols += [f"{prefix}{i + 1}" for i in range(n)]
    return cols + ["V", "phase", "sigma"]


DIAGNOSTIC_COLUMNS = ["t", "lambda_min", "mre_residual", "xi_sigma_norm", "theta_bound", "excited"]


def stack_dump_columns(n: int, p: int) -> list[str]:
    cols = ["sigma", "t_i"] + [f"U_f{i + 1}" for i in range(n)]
    return cols + [f"Y_f{i + 1}{j + 1}" for i in range(n) for j in range(p)]


@dataclass
class SimTrace:
    """Everything one run produces.

    Attributes:
        n: State dimension.
        p: Parameter dimension.
        records: Trace rows keyed by ``trace_columns``.
        switches: Phase starts, the initial one included.
        dwell: ``{"sigma", "denied_budget"}`` per GPS-denied interval.
        diagnostics: Rows keyed by ``DIAGNOSTIC_COLUMNS``.
        stack_dump: Stored history-stack entries per interval, when requested.
        excitation_times: ``(sigma, T_sigma or None)`` per closed interval.
        max_V: Largest ``V`` over every integration step.
        V_u: Ceiling the safety monitor checks against.
    """

    n: int
    p: int
    V_u: float
    records: list[dict] = field(default_factory=list)
    switches: list[SwitchRecord] = field(default_factory=list)
    dwell: list[dict] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    stack_dump: list[dict] = field(default_factory=list)
    excitation_times: list[tuple[int, float | None]] = field(default_factory=list)
    max_V: float = 0.0

    @property
    def safety_ok(self) -> bool:
        return self.max_V <= self.V_u * (1.0 + SAFETY_MARGIN)

    @property
    def denied_budgets(self) -> list[float]:
        return [row["denied_budget"] for row in self.dwell]

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.records])

    def vectors(self, prefix: str, size: int) -> np.ndarray:
        """Stack ``prefix1 .. prefix<size>`` columns into a ``(len, size)`` array."""
        if not self.records:
            return np.zeros((0, size))
        return np.column_stack([self.column(f"{prefix}{i + 1}") for i in range(size)])


def rk4_step(state: np.ndarray, t: float, h: float, rate: RateFn) -> np.ndarray:
    """One classical Runge-Kutta step.

    Raises:
        NumericalBlowupError: If any stage or the result is not finite.
    """
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    k1 = rate(t, state)
    if not np.all(np.isfinite(k1)):
        raise NumericalBlowupError("non-finite rate in stage 1", t)
    k2 = rate(t + 0.5 * h, state + 0.5 * h * k1)
    if not np.all(np.isfinite(k2)):
        raise NumericalBlowupError("non-finite rate in stage 2", t)
    k3 = rate(t + 0.5 * h, state + 0.5 * h * k2)
    if not np.all(np.isfinite(k3)):
        raise NumericalBlowupError("non-finite rate in stage 3", t)
    k4 = rate(t + h, state + h * k3)
    if not np.all(np.isfinite(k4)):
        raise NumericalBlowupError("non-finite rate in stage 4", t)
    result = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(result)):
        raise NumericalBlowupError("non-finite state after step", t)
    return result


class _Layout:
    """Slices of the composite state vector.

    Order: plant ``x``, observer ``x_hat``, estimate ``theta_hat``, the
    exponential filter ``(w, Y_f, xi_f)`` and the per-step quadrature
    accumulators of ``f + u``, ``Y`` and ``d``.
    """

    def __init__(self, n: int, p: int) -> None:
        self.n, self.p = n, p
        sizes = [("x", n), ("x_hat", n), ("theta_hat", p), ("w", n), ("Y_f", n * p),
                 ("xi_f", n), ("q_fu", n), ("q_Y", n * p), ("q_d", n)]
        self.slices: dict[str, slice] = {}
        start = 0
        for name, size in sizes:
            self.slices[name] = slice(start, start + size)
            start += size
        self.size = start

    def get(self, state: np.ndarray, name: str) -> np.ndarray:
        value = state[self.slices[name]]
        return value.reshape(self.n, self.p) if name in ("Y_f", "q_Y") else value

    def set(self, state: np.ndarray, name: str, value: np.ndarray) -> None:
        state[self.slices[name]] = np.asarray(value, dtype=float).reshape(-1)


@dataclass
class _Interval:
    """Learning state of the current GPS-available interval."""

    buffer: signals.SampleBuffer
    learner: aggregation.HistoryStack | aggregation.EwState
    excited_at: float | None = None


def run(
    model: SystemModel,
    trajectory: DesiredTrajectory,
    est_cfg: EstimatorConfig,
    gains: GainSet,
    consts: AnalysisConstants,
    engine_cfg: EngineConfig,
    variant: str = "cl",
    settings: LearningSettings | None = None,
) -> SimTrace:
    """Simulate one scenario and return its trace.

    Args:
        model: Plant; ``theta_true`` is read only by the plant and by trace
            diagnostics.
        trajectory: Desired trajectory.
        est_cfg: Update-law gains and the initial estimate.
        gains: Observer and controller gains.
        consts: Dwell-time constants; ``theta_bound`` is replaced as the run
            tightens it.
        engine_cfg: Step, horizon, stride, seed and initial states.
        variant: ``"cl"``, ``"ew"`` or ``"expfilter"``.
        settings: Stack, filter and scheduling settings.

    Returns:
        The full ``SimTrace``.

    Raises:
        NumericalBlowupError: If the integration produces non-finite values.
        InfeasibleStartError: If a GPS-denied interval would start above ``V_u``.
    """
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
    settings = settings or LearningSettings()
    filter_kind, aggregation_kind = VARIANTS[variant]
    n, p = model.n, model.p
    h = engine_cfg.h
    filter_cfg = signals.FilterConfig(filter_kind, settings.beta, settings.window, h)
    use_window = filter_kind == signals.WINDOWED
    exp_filter = signals.ExponentialFilterState(model, filter_cfg.beta)

    trace = SimTrace(n=n, p=p, V_u=consts.V_u)
    n_steps = engine_cfg.n_steps
    if n_steps == 0:
        logger.info("t_end=0: nothing to integrate")
        return trace

    x0 = np.asarray(engine_cfg.x0, dtype=float)
    xhat0 = np.zeros(n) if engine_cfg.xhat0 is None else np.asarray(engine_cfg.xhat0, dtype=float)
    if x0.shape != (n,) or xhat0.shape != (n,):
        raise InvalidInputError(f"x0 and xhat0 must have {n} entries")
    if est_cfg.p != p:
        raise InvalidInputError(f"theta_hat0 has {est_cfg.p} entries, model has p={p}")

    lay = _Layout(n, p)
    state = np.zeros(lay.size)
    lay.set(state, "x", x0)
    lay.set(state, "x_hat", xhat0)
    lay.set(state, "theta_hat", est_cfg.theta_hat0)
    gen = DisturbanceGenerator(engine_cfg.seed, model.d_bar, engine_cfg.hold_step, n)
    bound = ThetaBound(initial_bound(est_cfg))
    lambda_y = settings.excitation_level

    def new_interval(t: float) -> _Interval:
        exp_filter.reset(t, lay.get(state, "x"))
        for name in ("w", "Y_f", "xi_f"):
            lay.set(state, name, getattr(exp_filter, name))
        layer_stiffness(gains, model.d_bar + consts.Y_bar * bound.current, h)
        buf = signals.SampleBuffer(model, filter_cfg.window, slack=2.0 * h, anchor=t)
        if aggregation_kind == "stack":
            learner = aggregation.HistoryStack(p, settings.capacity, settings.lambda_bar, anchor=t)
        else:
            learner = aggregation.EwState(p, settings.alpha, anchor=t)
        return _Interval(buf, learner)

    def close_interval(interval: _Interval, sigma: int, t: float) -> None:
        trace.excitation_times.append((sigma, interval.excited_at))
        bound.close_interval(
            sigma, t, est_cfg, interval.learner.lambda_min, settings.lambda_bar,
            model.d_bar, interval.excited_at,
            a_priori=est_cfg.theta_norm_bound + float(np.linalg.norm(lay.get(state, "theta_hat"))),
        )
        if settings.stack_dump and isinstance(interval.learner, aggregation.HistoryStack):
            for entry in interval.learner.entries:
                row = {"sigma": sigma, "t_i": entry.t}
                row.update({f"U_f{i + 1}": entry.U_f[i] for i in range(n)})
                row.update({f"Y_f{i + 1}{j + 1}": entry.Y_f[i, j] for i in range(n) for j in range(p)})
                trace.stack_dump.append(row)

    def log_switch(phase: Phase, V: float) -> None:
        record = SwitchRecord(phase.sigma, phase.kind, phase.t_start, V, bound.current, phase.budget)
        trace.switches.append(record)
        if not phase.available:
            trace.dwell.append({"sigma": phase.sigma, "denied_budget": phase.budget})
        logger.info(
            "sigma=%d %s at t=%.3f: V=%.4g theta_bound=%.4g budget=%.3f s",
            phase.sigma, phase.kind.value, phase.t_start, V, bound.current, phase.budget,
        )

    def inputs(t: float, s: np.ndarray, available: bool):
        """Control input, v_r, and the model terms at ``x_hat``, for state *s*."""
        x, x_hat, theta_hat = lay.get(s, "x"), lay.get(s, "x_hat"), lay.get(s, "theta_hat")
        x_d, xd_rate = trajectory.desired(t)
        terms = (model.drift(t, x_hat), model.regressor(t, x_hat))
        v_r = sliding_term(x - x_hat, bound.current, model.d_bar, consts.Y_bar, gains) if available else None
        u = control_input(model, t, x_hat, theta_hat, x_hat - x_d, xd_rate, gains, available, v_r, terms)
        return u, v_r, terms

    V0 = errors(x0, xhat0, trajectory.value(0.0)).V
    phase = initial_phase(V0, consts.with_theta_bound(bound.current), settings.available_floor)
    log_switch(phase, V0)
    interval = new_interval(0.0)
    increments = None
    U_sigma, Y_sigma = np.zeros(p), np.zeros((p, p))

    for k in range(n_steps + 1):
        t = k * h
        x = lay.get(state, "x").copy()
        x_hat = lay.get(state, "x_hat")
        theta_hat = lay.get(state, "theta_hat").copy()
        err = errors(x, x_hat, trajectory.value(t))
        trace.max_V = max(trace.max_V, err.V)

        if k > 0 and phase.expired(t):
            if phase.available:
                close_interval(interval, phase.sigma, t)
            phase = advance_phase(
                phase, t, err.V, bound.current, consts.with_theta_bound(bound.current),
                settings.available_floor, settings.denied_scale,
            )
            log_switch(phase, err.V)
            if phase.available:
                interval = new_interval(t)
                increments = None
                U_sigma, Y_sigma = np.zeros(p), np.zeros((p, p))

        available = phase.available
        u_now, _, _ = inputs(t, state, available)

        if available:
            pair = None
            if use_window:
                signals.push_sample(interval.buffer, t, x, u_now,
                                    increments=increments if len(interval.buffer) else None)
                try:
                    pair = signals.windowed_pair(interval.buffer, t)
                except NotWarmError:
                    pair = None
            elif t > interval.buffer.anchor:
                exp_filter.load(t, lay.get(state, "w"), lay.get(state, "Y_f"), lay.get(state, "xi_f"))
                pair = exp_filter.pair(x)
            learner = interval.learner
            if pair is not None:
                if isinstance(learner, aggregation.HistoryStack):
                    if k % engine_cfg.record_stride == 0:
                        aggregation.try_admit(learner, pair)
                else:
                    aggregation.ew_update(learner, pair, h)
                if interval.excited_at is None:
                    interval.excited_at = aggregation.excitation_time(learner, lambda_y, t)
                    if interval.excited_at is not None:
                        logger.debug("sigma=%d excited at t=%.3f", phase.sigma, interval.excited_at)
            U_sigma, Y_sigma = learner.U_sigma.copy(), learner.Y_sigma.copy()

        if k % engine_cfg.record_stride == 0:
            _record(trace, lay, state, t, trajectory, u_now, err, phase, model.theta_true)
            learner = interval.learner
            trace.diagnostics.append({
                "t": t,
                "lambda_min": learner.lambda_min if available else 0.0,
                "mre_residual": float(np.linalg.norm(U_sigma - Y_sigma @ model.theta_true)) if available else 0.0,
                "xi_sigma_norm": float(np.linalg.norm(learner.Xi_sigma)) if available else 0.0,
                "theta_bound": bound.current,
                "excited": int(available and interval.excited_at is not None and t >= interval.excited_at),
            })

        if k == n_steps:
            break

        d = gen.sample(t)
        excited_at = interval.excited_at if available else None
        held_U, held_Y = U_sigma, Y_sigma

        def rate(tau: float, s: np.ndarray) -> np.ndarray:
            u, v_r, terms = inputs(tau, s, available)
            xs, xs_hat, th = lay.get(s, "x"), lay.get(s, "x_hat"), lay.get(s, "theta_hat")
            f_x, Y_x = model.drift(tau, xs), model.regressor(tau, xs)
            out = np.zeros_like(s)
            lay.set(out, "x", f_x + u + Y_x @ model.theta_true + d)
            lay.set(out, "x_hat", observer_rate(model, tau, xs_hat, th, u, available, v_r, terms))
            if not available:
                return out
            lay.set(out, "theta_hat", theta_rate(est_cfg, th, held_U, held_Y, tau, excited_at))
            if use_window:
                lay.set(out, "q_fu", f_x + u)
                lay.set(out, "q_Y", Y_x)
                lay.set(out, "q_d", d)
            else:
                filtered = (lay.get(s, "w"), lay.get(s, "Y_f"), lay.get(s, "xi_f"))
                for name, value in zip(("w", "Y_f", "xi_f"), exp_filter.rates(tau, xs, u, *filtered, d)):
                    lay.set(out, name, value)
            return out

        state = rk4_step(state, t, h, rate)
        increments = (lay.get(state, "q_fu").copy(), lay.get(state, "q_Y").copy(), lay.get(state, "q_d").copy())
        for name in ("q_fu", "q_Y", "q_d"):
            state[lay.slices[name]] = 0.0

    if not trace.safety_ok:
        logger.warning("safety monitor tripped: max V=%.6g exceeds V_u=%.6g", trace.max_V, consts.V_u)
    return trace


def _record(
    trace: SimTrace,
    lay: _Layout,
    state: np.ndarray,
    t: float,
    trajectory: DesiredTrajectory,
    u: np.ndarray,
    err: ErrorState,
    phase: Phase,
    theta_true: np.ndarray,
) -> None:
    x, x_hat, theta_hat = lay.get(state, "x"), lay.get(state, "x_hat"), lay.get(state, "theta_hat")
    row: dict = {"t": t}
    for prefix, values in (("x", x), ("xhat", x_hat), ("xd", trajectory.value(t)), ("u", u)):
        row.update({f"{prefix}{i + 1}": float(v) for i, v in enumerate(values)})
    row.update({f"thetahat{j + 1}": float(v) for j, v in enumerate(theta_hat)})
    row.update({f"thetatilde{j + 1}": float(v) for j, v in enumerate(theta_true - theta_hat)})
    row.update({f"e1_{i + 1}": float(v) for i, v in enumerate(err.e1)})
    row.update({f"e2_{i + 1}": float(v) for i, v in enumerate(err.e2)})
    row.update({"V": err.V, "phase": phase.kind.value, "sigma": phase.sigma})
    trace.records.append(row)
