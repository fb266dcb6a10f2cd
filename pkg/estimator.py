"""Switched adaptive update law and parameter-error bounds.

The update law runs only once the interval's information matrix is
sufficiently exciting and is frozen otherwise, including every GPS-denied
interval.  The bound helpers give the a priori envelope on ``||theta~||``
that the scheduler uses to size the next GPS-denied interval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorConfig:
    """Gains and prior knowledge for the update law.

    Attributes:
        k_theta: Scalar learning gain.
        gamma: Symmetric positive definite adaptation gain matrix.
        theta_hat0: Initial estimate.
        theta_norm_bound: A priori bound on ``||theta||``.
        k_xi: Ratio bounding the aggregated disturbance term by ``k_xi * d_bar``.
    """

    k_theta: float
    gamma: np.ndarray
    theta_hat0: np.ndarray
    theta_norm_bound: float = 1.5
    k_xi: float = 1.0

    def __post_init__(self) -> None:
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        theta_hat0 = np.asarray(self.theta_hat0, dtype=float).reshape(-1)
        p = theta_hat0.size
        if gamma.shape != (p, p):
            raise InvalidInputError(f"gamma must be {p}x{p}, got shape {gamma.shape}")
        if not np.allclose(gamma, gamma.T):
            raise InvalidInputError("gamma must be symmetric")
        if np.linalg.eigvalsh(gamma)[0] <= 0:
            raise InvalidInputError("gamma must be positive definite")
        if self.k_theta <= 0:
            raise InvalidInputError(f"k_theta must be positive, got {self.k_theta}")
        if self.theta_norm_bound < 0 or self.k_xi <= 0:
            raise InvalidInputError("theta_norm_bound must be nonnegative and k_xi positive")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(theta_hat0))):
            raise InvalidInputError("gamma and theta_hat0 must be finite")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "theta_hat0", theta_hat0)

    @property
    def p(self) -> int:
        return self.theta_hat0.size

    @property
    def gamma_lower(self) -> float:
        """Smallest eigenvalue of ``gamma^-1``."""
        return 1.0 / float(np.linalg.eigvalsh(self.gamma)[-1])

    @property
    def gamma_upper(self) -> float:
        """Largest eigenvalue of ``gamma^-1``."""
        return 1.0 / float(np.linalg.eigvalsh(self.gamma)[0])


def theta_rate(
    cfg: EstimatorConfig,
    theta_hat: np.ndarray,
    U_sigma: np.ndarray,
    Y_sigma: np.ndarray,
    t: float,
    T_sigma: float | None,
) -> np.ndarray:
    """``k_theta * gamma @ (U_sigma - Y_sigma @ theta_hat)`` once excited, else zero."""
    if T_sigma is None or t < T_sigma:
        return np.zeros(cfg.p)
    residual = np.asarray(U_sigma, dtype=float) - np.asarray(Y_sigma, dtype=float) @ theta_hat
    return cfg.k_theta * (cfg.gamma @ residual)


class UubConstants(NamedTuple):
    rho: float
    varpi: float
    radius: float


class BoundConstants(NamedTuple):
    """Inputs of ``propagate_bound``: decay rate, floor term and gain bounds."""

    rho: float
    varpi: float
    gamma_upper: float
    gamma_lower: float

    @property
    def ratio(self) -> float:
        return self.gamma_upper / self.gamma_lower

    @property
    def floor(self) -> float:
        return self.varpi / self.rho if self.rho > 0 else math.inf


def uub_constants(
    cfg: EstimatorConfig, lambda_y: float, k_xi: float | None = None, d_bar: float = 0.0
) -> UubConstants:
    """Ultimate-boundedness constants for excitation level *lambda_y*.

    ``rho = k_theta lambda_y / 4``, ``varpi = k_theta k_xi**2 d_bar**2 / (2 lambda_y)``
    and ``radius = sqrt(ratio * varpi / rho)`` with ``ratio`` the condition
    number of ``gamma``.

    Raises:
        InvalidInputError: If *lambda_y* is not positive.
    """
    if not lambda_y > 0:
        raise InvalidInputError(f"lambda_y must be positive, got {lambda_y}")
    if d_bar < 0:
        raise InvalidInputError(f"d_bar must be nonnegative, got {d_bar}")
    k_xi = cfg.k_xi if k_xi is None else k_xi
    rho = cfg.k_theta * lambda_y / 4.0
    varpi = cfg.k_theta * k_xi**2 * d_bar**2 / (2.0 * lambda_y)
    radius = math.sqrt(cfg.gamma_upper / cfg.gamma_lower * varpi / rho)
    return UubConstants(rho, varpi, radius)


def bound_constants(
    cfg: EstimatorConfig, lambda_y: float, d_bar: float, k_xi: float | None = None
) -> BoundConstants:
    uub = uub_constants(cfg, lambda_y, k_xi, d_bar)
    return BoundConstants(uub.rho, uub.varpi, cfg.gamma_upper, cfg.gamma_lower)


def propagate_bound(theta_bound_in: float, elapsed: float, consts: BoundConstants) -> float:
    """Bound on ``||theta~||`` after *elapsed* seconds of active adaptation.

    ``sqrt(ratio * (b**2 e + varpi/rho (1 - e)))`` with
    ``e = exp(-rho elapsed / gamma_upper)``.
    """
    if elapsed < 0:
        raise InvalidInputError(f"elapsed must be nonnegative, got {elapsed}")
    if theta_bound_in < 0:
        raise InvalidInputError(f"theta_bound_in must be nonnegative, got {theta_bound_in}")
    decay = math.exp(-consts.rho * elapsed / consts.gamma_upper)
    squared = theta_bound_in**2 * decay + (consts.floor * (1.0 - decay) if decay < 1.0 else 0.0)
    return math.sqrt(consts.ratio * squared)


def recursive_bound(theta0: float, interval_lengths: Iterable[float], consts: BoundConstants) -> float:
    """Closed form of ``propagate_bound`` folded over several intervals.

    An empty list returns *theta0*.
    """
    lengths = list(interval_lengths)
    if any(length < 0 for length in lengths):
        raise InvalidInputError("interval lengths must be nonnegative")
    if not lengths:
        return theta0
    ratio = consts.ratio
    decays = [math.exp(-consts.rho * length / consts.gamma_upper) for length in lengths]
    k = len(lengths) - 1
    head = ratio ** (k + 1) * theta0**2 * math.prod(decays)
    phi = 0.0
    for j in range(k + 1):
        tail = math.prod(decays[j + 1:])
        phi += ratio ** (k - j + 1) * tail * (1.0 - decays[j])
    floor = consts.floor if phi > 0 else 0.0
    return math.sqrt(head + floor * phi)


def initial_bound(cfg: EstimatorConfig) -> float:
    """Conservative starting bound ``theta_bar + ||theta_hat0||``."""
    return cfg.theta_norm_bound + float(np.linalg.norm(cfg.theta_hat0))


def empirical_k_xi(xi_norms: Iterable[float], d_bar: float) -> float:
    """``sup ||Xi_sigma|| / d_bar`` over a trace; 0 when there is no disturbance."""
    values = [float(v) for v in xi_norms]
    if d_bar <= 0 or not values:
        return 0.0
    return max(values) / d_bar


@dataclass
class ThetaBound:
    """Running bound on ``||theta~||`` with one entry per GPS-available interval.

    Attributes:
        current: Bound in force for the present interval.
        history: ``(sigma, t, bound)`` recorded at each GPS-denied start.
    """

    current: float
    history: list[tuple[int, float, float]] = field(default_factory=list)

    def close_interval(
        self,
        sigma: int,
        t: float,
        cfg: EstimatorConfig,
        lambda_measured: float,
        lambda_floor: float,
        d_bar: float,
        excited_at: float | None,
        a_priori: float | None = None,
    ) -> float:
        """Propagate over the adaptation time of the interval ending at *t*.

        Adaptation runs from the excitation time to *t*.  Without excitation
        the bound carries over unchanged.  *a_priori*, when given, is a bound
        that holds regardless of learning (``theta_norm_bound + ||theta_hat||``)
        and caps the result.
        """
        if excited_at is None:
            logger.warning("interval %d ended at t=%.3f without sufficient excitation", sigma, t)
        else:
            lambda_y = max(lambda_measured, lambda_floor)
            consts = bound_constants(cfg, lambda_y, d_bar)
            self.current = propagate_bound(self.current, max(0.0, t - excited_at), consts)
        if a_priori is not None and a_priori < self.current:
            logger.debug("interval %d: bound %.4g capped at %.4g", sigma, self.current, a_priori)
            self.current = a_priori
        self.history.append((sigma, t, self.current))
        return self.current
