"""Observer, tracking controller and their error signals.

The observer runs on the model ``f + Y theta_hat + u`` and adds a sliding
injection ``v_r`` while GPS is available.  The controller cancels the same
model terms so that ``e2' = -k2 e2`` in both phases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from dynamics import SystemModel
from errors import InvalidInputError, PhaseError

logger = logging.getLogger(__name__)

# Classical RK4 is stable for h * lambda in [-2.785, 0] on the real axis.
RK4_REAL_LIMIT = 2.785


def _as_gain(value, n: int | None = None) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = np.diag(arr)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"gain must be a square matrix or a diagonal, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise InvalidInputError(f"gain must be {n}x{n}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class GainSet:
    """Observer and controller gains.

    ``k1`` and ``k2`` may be given as diagonals; both must have positive
    definite symmetric parts.  ``epsilon`` is the boundary-layer width and
    ``pure_sign`` swaps the saturation for ``sign``.
    """

    k1: np.ndarray
    k2: np.ndarray
    epsilon: float = 1e-3
    pure_sign: bool = False

    def __post_init__(self) -> None:
        k1 = _as_gain(self.k1)
        k2 = _as_gain(self.k2, k1.shape[0])
        for name, gain in (("k1", k1), ("k2", k2)):
            if np.linalg.eigvalsh(0.5 * (gain + gain.T))[0] <= 0:
                raise InvalidInputError(f"{name} must be positive definite")
        if not self.epsilon > 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)

    @property
    def k1_min(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.k1 + self.k1.T))[0])

    @property
    def k2_min(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.k2 + self.k2.T))[0])


@dataclass(frozen=True)
class ErrorState:
    e1: np.ndarray
    e2: np.ndarray
    V: float


def errors(x: np.ndarray, x_hat: np.ndarray, x_d: np.ndarray) -> ErrorState:
    """Estimation error ``x - x_hat``, tracking error ``x_hat - x_d`` and ``V``."""
    x, x_hat, x_d = (np.asarray(v, dtype=float) for v in (x, x_hat, x_d))
    if not x.shape == x_hat.shape == x_d.shape or x.ndim != 1:
        raise InvalidInputError(f"state shapes differ: {x.shape}, {x_hat.shape}, {x_d.shape}")
    e1 = x - x_hat
    e2 = x_hat - x_d
    V = 0.5 * float(e1 @ e1) + 0.5 * float(e2 @ e2)
    return ErrorState(e1, e2, V)


def sliding_term(
    e1: np.ndarray,
    theta_bound: float,
    d_bar: float,
    Y_bar: float,
    gains: GainSet,
    available: bool = True,
) -> np.ndarray:
    """``k1 e1 + (d_bar + Y_bar theta_bound) sat(e1 / epsilon)``.

    Raises:
        PhaseError: If called while GPS is denied.
    """
    if not available:
        raise PhaseError("sliding term needs e1, which is unmeasured while GPS is denied")
    e1 = np.asarray(e1, dtype=float)
    if gains.pure_sign:
        switch = np.sign(e1)
    else:
        switch = np.clip(e1 / gains.epsilon, -1.0, 1.0)
    return gains.k1 @ e1 + (d_bar + Y_bar * theta_bound) * switch


def layer_stiffness(gains: GainSet, switch_gain: float, h: float) -> float:
    """Step-scaled slope of ``v_r`` inside the boundary layer.

    Inside ``|e1| < epsilon`` the injection grows like
    ``(lambda_max(k1) + switch_gain / epsilon) e1``.  Above
    ``RK4_REAL_LIMIT`` the fixed-step integration no longer resolves the
    layer and ``e1`` chatters with an amplitude near ``h * switch_gain``;
    a warning says so.  ``pure_sign`` gains are always reported as stiff.

    Args:
        gains: Observer gains.
        switch_gain: ``d_bar + Y_bar * theta_bound``.
        h: Integration step.

    Returns:
        ``h`` times the layer slope, ``inf`` for ``pure_sign``.
    """
    if not h > 0:
        raise InvalidInputError(f"h must be positive, got {h}")
    k1_max = float(np.linalg.eigvalsh(0.5 * (gains.k1 + gains.k1.T))[-1])
    slope = math.inf if gains.pure_sign else k1_max + switch_gain / gains.epsilon
    stiffness = h * slope
    if stiffness > RK4_REAL_LIMIT:
        logger.warning(
            "boundary layer unresolved: h*slope=%.3g > %.3f, expect e1 chatter near %.3g",
            stiffness, RK4_REAL_LIMIT, h * switch_gain,
        )
    return stiffness


def _model_terms(model: SystemModel, t: float, x_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return model.drift(t, x_hat), model.regressor(t, x_hat)


def _check_injection(available: bool, v_r: np.ndarray | None) -> None:
    if available and v_r is None:
        raise PhaseError("v_r is required while GPS is available")
    if not available and v_r is not None:
        raise PhaseError("v_r must be omitted while GPS is denied")


def observer_rate(
    model: SystemModel,
    t: float,
    x_hat: np.ndarray,
    theta_hat: np.ndarray,
    u: np.ndarray,
    available: bool,
    v_r: np.ndarray | None = None,
    terms: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """``f(x_hat) + Y(x_hat) theta_hat + u``, plus ``v_r`` when available.

    *terms* may carry ``(f(x_hat), Y(x_hat))`` already evaluated at *t*.
    """
    _check_injection(available, v_r)
    f_hat, Y_hat = terms if terms is not None else _model_terms(model, t, x_hat)
    rate = f_hat + Y_hat @ theta_hat + u
    return rate + v_r if available else rate


def control_input(
    model: SystemModel,
    t: float,
    x_hat: np.ndarray,
    theta_hat: np.ndarray,
    e2: np.ndarray,
    xd_rate: np.ndarray,
    gains: GainSet,
    available: bool,
    v_r: np.ndarray | None = None,
    terms: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """``xd' - f(x_hat) - k2 e2 - Y(x_hat) theta_hat``, minus ``v_r`` when available."""
    _check_injection(available, v_r)
    f_hat, Y_hat = terms if terms is not None else _model_terms(model, t, x_hat)
    u = np.asarray(xd_rate, dtype=float) - f_hat - gains.k2 @ e2 - Y_hat @ theta_hat
    return u - v_r if available else u
