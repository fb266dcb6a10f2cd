"""Dwell-time budgets and the GPS-available / GPS-denied state machine.

A GPS-available interval lasts at least as long as the Lyapunov envelope
needs to contract ``V`` to ``V_l``.  A GPS-denied interval lasts at most as
long as the worst-case growth of ``V`` needs to reach ``V_u``; that budget
grows as the parameter-error bound shrinks.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace

from errors import InfeasibleStartError, InvalidInputError

logger = logging.getLogger(__name__)

# Switch instants are compared against budgets with this slack.
SWITCH_TOL = 1e-9


class PhaseKind(str, enum.Enum):
    AVAILABLE = "available"
    DENIED = "denied"


@dataclass(frozen=True)
class AnalysisConstants:
    """Constants of the dwell-time analysis.

    Attributes:
        L_f: Lipschitz constant of the drift on the operating box.
        L_Y: Lipschitz constant of the regressor on the operating box.
        Y_bar: Sup of ``||Y||`` on the operating box.
        d_bar: Disturbance bound.
        k1_lower: ``lambda_min(k1) - L_f``; must be positive.
        k2_lower: ``lambda_min(k2)``.
        V_l: Contraction target of GPS-available intervals.
        V_u: Ceiling of GPS-denied intervals, below ``eta**2 / 2``.
        eta: Radius of the ball the errors must stay in.
        theta_bound: Current bound on ``||theta~||``.
    """

    L_f: float
    L_Y: float
    Y_bar: float
    d_bar: float
    k1_lower: float
    k2_lower: float
    V_l: float
    V_u: float
    eta: float
    theta_bound: float = 0.0

    def __post_init__(self) -> None:
        for name in ("L_f", "L_Y", "Y_bar", "d_bar", "theta_bound"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidInputError(f"{name} must be finite and nonnegative, got {value}")
        if self.k1_lower <= 0:
            raise InvalidInputError(f"lambda_min(k1) must exceed L_f (k1_lower={self.k1_lower})")
        if self.k2_lower <= 0:
            raise InvalidInputError(f"k2 must be positive definite (k2_lower={self.k2_lower})")
        if not 0 < self.V_l < self.V_u:
            raise InvalidInputError(f"need 0 < V_l < V_u, got V_l={self.V_l}, V_u={self.V_u}")
        if not self.V_u < 0.5 * self.eta**2:
            raise InvalidInputError(f"need V_u < eta^2/2, got V_u={self.V_u}, eta={self.eta}")

    @property
    def k_a(self) -> float:
        """Decay rate of ``V`` while GPS is available."""
        return min(self.k1_lower / 2.0, self.k2_lower / 2.0)

    @property
    def L_1(self) -> float:
        return self.L_f + self.L_Y * self.theta_bound

    @property
    def k_u(self) -> float:
        """Growth rate of ``V`` while GPS is denied."""
        return min(1.5 * self.L_1, self.k2_lower)

    def with_theta_bound(self, theta_bound: float) -> AnalysisConstants:
        return replace(self, theta_bound=theta_bound)


def build_constants(
    L_f: float,
    L_Y: float,
    Y_bar: float,
    d_bar: float,
    k1_min: float,
    k2_min: float,
    V_l: float,
    V_u: float,
    eta: float,
    theta_bound: float = 0.0,
) -> AnalysisConstants:
    """Assemble ``AnalysisConstants`` from Lipschitz data and gain eigenvalues."""
    return AnalysisConstants(
        L_f=L_f,
        L_Y=L_Y,
        Y_bar=Y_bar,
        d_bar=d_bar,
        k1_lower=k1_min - L_f,
        k2_lower=k2_min,
        V_l=V_l,
        V_u=V_u,
        eta=eta,
        theta_bound=theta_bound,
    )


def min_available_dwell(V_at_start: float, consts: AnalysisConstants) -> float:
    """Time for ``V_at_start * exp(-k_a t)`` to reach ``V_l``; zero if already below.

    Raises:
        InvalidInputError: If *V_at_start* is not positive.
    """
    if not V_at_start > 0:
        raise InvalidInputError(f"V at a GPS-available start must be positive, got {V_at_start}")
    return max(0.0, math.log(V_at_start / consts.V_l) / consts.k_a)


def decay_envelope(V_at_start: float, elapsed: float, consts: AnalysisConstants) -> float:
    """Upper bound on ``V`` after *elapsed* seconds of GPS-available operation."""
    return V_at_start * math.exp(-consts.k_a * elapsed)


def max_denied_dwell(V_at_switch: float, theta_bound: float, consts: AnalysisConstants) -> float:
    """Longest GPS-denied stay that keeps ``V`` below ``V_u``.

    ``ln((V_u + c) / (V + c)) / k_u`` with
    ``c = (d_bar + Y_bar theta_bound)**2 / (2 L_1 k_u)``; ``L_1`` and ``k_u``
    use *theta_bound*.

    Raises:
        InfeasibleStartError: If *V_at_switch* exceeds ``V_u``.
        InvalidInputError: If *V_at_switch* is negative or ``L_1`` is zero.
    """
    if V_at_switch < 0:
        raise InvalidInputError(f"V must be nonnegative, got {V_at_switch}")
    if V_at_switch > consts.V_u:
        raise InfeasibleStartError(
            f"V={V_at_switch:.6g} already exceeds V_u={consts.V_u:.6g} at a GPS-denied start"
        )
    local = consts.with_theta_bound(theta_bound)
    if local.L_1 <= 0:
        raise InvalidInputError("L_f + L_Y * theta_bound must be positive to bound GPS-denied growth")
    k_u = local.k_u
    c = (local.d_bar + local.Y_bar * theta_bound) ** 2 / (2.0 * local.L_1 * k_u)
    if V_at_switch + c <= 0:
        raise InvalidInputError("V + c must be positive; the budget is unbounded")
    return math.log((local.V_u + c) / (V_at_switch + c)) / k_u


@dataclass(frozen=True)
class Phase:
    kind: PhaseKind
    sigma: int
    t_start: float
    budget: float

    @property
    def available(self) -> bool:
        return self.kind is PhaseKind.AVAILABLE

    def elapsed(self, t: float) -> float:
        return t - self.t_start

    def expired(self, t: float) -> bool:
        return t - self.t_start >= self.budget - SWITCH_TOL


@dataclass(frozen=True)
class SwitchRecord:
    """One row of the switch log."""

    sigma: int
    kind: PhaseKind
    t: float
    V: float
    theta_bound: float
    budget: float

    def as_row(self) -> dict:
        return {
            "sigma": self.sigma,
            "kind": self.kind.value,
            "t": self.t,
            "V": self.V,
            "theta_bound": self.theta_bound,
            "budget": self.budget,
        }


def initial_phase(
    V0: float, consts: AnalysisConstants, available_floor: float = 0.0, t0: float = 0.0
) -> Phase:
    """First GPS-available phase, sized from the initial ``V``."""
    dwell = min_available_dwell(V0, consts) if V0 > 0 else 0.0
    return Phase(PhaseKind.AVAILABLE, 0, t0, max(dwell, available_floor))


def advance_phase(
    phase: Phase,
    t: float,
    V_now: float,
    theta_bound: float,
    consts: AnalysisConstants,
    available_floor: float = 0.0,
    denied_scale: float = 1.0,
) -> Phase:
    """Return the phase in force at *t*.

    The phase changes only when its budget has run out.  A new GPS-denied
    budget comes from ``max_denied_dwell`` at the switch, scaled by
    *denied_scale*; a new GPS-available budget is the larger of
    ``min_available_dwell`` and *available_floor*, and ``sigma`` advances.

    Raises:
        InvalidInputError: If *t* precedes the phase start.
        InfeasibleStartError: If a GPS-denied interval would start above ``V_u``.
    """
    if t < phase.t_start - SWITCH_TOL:
        raise InvalidInputError(f"t={t} precedes phase start {phase.t_start}")
    if not phase.expired(t):
        return phase
    if phase.available:
        budget = denied_scale * max_denied_dwell(V_now, theta_bound, consts)
        if budget <= 0:
            logger.warning("sigma=%d: GPS-denied budget is zero at t=%.3f (V=%.4g)", phase.sigma, t, V_now)
            budget = 0.0
        return Phase(PhaseKind.DENIED, phase.sigma, t, budget)
    dwell = min_available_dwell(V_now, consts) if V_now > 0 else 0.0
    return Phase(PhaseKind.AVAILABLE, phase.sigma + 1, t, max(dwell, available_floor))
