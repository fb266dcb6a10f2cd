"""Shared test helpers for the GPS dwell-time simulator tests.

Regular functions (not fixtures) that can be imported by any test module.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from scenario import ScenarioConfig
from scheduler import AnalysisConstants
from signals import FilteredPair


def make_pair(
    Y_f: list[list[float]],
    theta: tuple[float, ...] = (1.0, 0.5),
    t: float = 0.0,
    xi_f: list[float] | None = None,
) -> FilteredPair:
    """Build a filtered pair that satisfies ``U_f = Y_f theta + xi_f``.

    Args:
        Y_f: Filtered regressor rows.
        theta: Parameter vector used to build ``U_f``.
        t: Pair time stamp.
        xi_f: Optional disturbance part added to ``U_f``.

    Returns:
        A ``FilteredPair``.
    """
    Y = np.asarray(Y_f, dtype=float)
    xi = np.zeros(Y.shape[0]) if xi_f is None else np.asarray(xi_f, dtype=float)
    return FilteredPair(Y @ np.asarray(theta, dtype=float) + xi, Y, t, xi)


def scaled_identity_pair(c: float, t: float = 0.0) -> FilteredPair:
    """Pair with ``Y_f = c I``; its summand has ``lambda_min = c**2 / (1 + 2 c**2)``."""
    return make_pair([[c, 0.0], [0.0, c]], t=t)


def gain_to_scale(gain: float) -> float:
    """Inverse of ``c**2 / (1 + 2 c**2)``: the ``c`` giving a summand ``lambda_min`` of *gain*."""
    return float(np.sqrt(gain / (1.0 - 2.0 * gain)))


def make_constants(**overrides) -> AnalysisConstants:
    """``AnalysisConstants`` with ``k_a = 1``, ``L_1 = 1`` and ``k_u = 1.5`` unless overridden."""
    values = dict(
        L_f=1.0,
        L_Y=0.0,
        Y_bar=0.0,
        d_bar=1.0,
        k1_lower=2.0,
        k2_lower=2.0,
        V_l=0.3,
        V_u=2.0,
        eta=3.0,
        theta_bound=0.0,
    )
    values.update(overrides)
    return AnalysisConstants(**values)


def short_config(t_end: float = 1.0, **sections) -> ScenarioConfig:
    """Default scenario with a short horizon and per-section field overrides.

    Args:
        t_end: Simulation horizon in seconds.
        **sections: ``section_name={field: value}`` overrides, e.g.
            ``scheduler={"V_l": 1.0}``.

    Returns:
        A ``ScenarioConfig``.
    """
    cfg = ScenarioConfig()
    cfg = dataclasses.replace(cfg, engine=dataclasses.replace(cfg.engine, t_end=t_end))
    for name, fields in sections.items():
        cfg = dataclasses.replace(cfg, **{name: dataclasses.replace(getattr(cfg, name), **fields)})
    return cfg


def switching_config(t_end: float = 1.0, **sections) -> ScenarioConfig:
    """Short scenario whose first GPS-available interval ends near 0.55 s.

    With ``V_l = 1`` the contraction from ``V(0) = 3`` needs ``ln(3) / 2`` s,
    and a zero floor keeps that as the whole budget.
    """
    scheduler = {"V_l": 1.0, "available_floor": 0.0}
    scheduler.update(sections.pop("scheduler", {}))
    return short_config(t_end, scheduler=scheduler, **sections)
