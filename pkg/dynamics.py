"""Plant models, desired trajectories and the disturbance generator.

The plant is control affine, ``x' = f(t, x) + u + Y(t, x) theta + d(t, x)``.
``SystemModel`` carries ``theta`` so the simulated plant can be propagated,
but the observer, controller and estimator only ever call ``drift`` and
``regressor``; nothing outside the plant and the diagnostics reads
``theta_true``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from errors import InvalidInputError

logger = logging.getLogger(__name__)

DriftFn = Callable[[float, np.ndarray], np.ndarray]
RegressorFn = Callable[[float, np.ndarray], np.ndarray]

# Above this many grid points the Lipschitz sweep coarsens itself.
_MAX_GRID_POINTS = 200_000


def _as_vector(value: Sequence[float] | np.ndarray, size: int, name: str) -> np.ndarray:
    """Return *value* as a finite float vector of length *size*.

    Raises:
        InvalidInputError: On a shape mismatch or a non-finite entry.
    """
    arr = np.asarray(value, dtype=float)
    if arr.shape != (size,):
        raise InvalidInputError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values: {arr}")
    return arr


@dataclass(frozen=True)
class SystemModel:
    """Control-affine plant description.

    Attributes:
        n: State dimension.
        p: Parameter dimension.
        drift_fn: Known drift ``f(t, x)``.
        regressor_fn: Known regressor ``Y(t, x)`` with shape ``(n, p)``.
        theta_true: The unknown parameters; read only by ``plant_rate``
            and by diagnostics.
        d_bar: Sup-norm bound of the additive disturbance.
        name: Label used in logs and reports.
    """

    n: int
    p: int
    drift_fn: DriftFn
    regressor_fn: RegressorFn
    theta_true: np.ndarray
    d_bar: float
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.n < 1 or self.p < 1:
            raise InvalidInputError(f"dimensions must be positive, got n={self.n}, p={self.p}")
        if self.d_bar < 0 or not math.isfinite(self.d_bar):
            raise InvalidInputError(f"d_bar must be a finite nonnegative number, got {self.d_bar}")
        theta = _as_vector(self.theta_true, self.p, "theta_true")
        object.__setattr__(self, "theta_true", theta)

    def drift(self, t: float, x: np.ndarray) -> np.ndarray:
        """Evaluate the known drift ``f(t, x)``."""
        x = _as_vector(x, self.n, "x")
        return np.asarray(self.drift_fn(t, x), dtype=float)

    def regressor(self, t: float, x: np.ndarray) -> np.ndarray:
        """Evaluate the regressor ``Y(t, x)`` as an ``(n, p)`` matrix."""
        x = _as_vector(x, self.n, "x")
        return np.asarray(self.regressor_fn(t, x), dtype=float).reshape(self.n, self.p)

    def plant_rate(
        self,
        t: float,
        x: np.ndarray,
        u: np.ndarray,
        d: np.ndarray,
    ) -> np.ndarray:
        """Right-hand side of the true plant, ``f + u + Y theta + d``."""
        x = _as_vector(x, self.n, "x")
        u = _as_vector(u, self.n, "u")
        d = _as_vector(d, self.n, "d")
        return self.drift(t, x) + u + self.regressor(t, x) @ self.theta_true + d


def _benchmark_drift(t: float, x: np.ndarray) -> np.ndarray:
    return np.array([x[1], x[0]])


def _benchmark_regressor(t: float, x: np.ndarray) -> np.ndarray:
    return np.array([[0.0, 0.0], [-x[0], -x[0] ** 3]])


def benchmark_model(
    theta: Sequence[float] = (1.0, 0.5),
    d_bar: float = 1.5,
) -> SystemModel:
    """Return the second-order benchmark plant.

    ``f(x) = [x2, x1]`` and ``Y(x) = [[0, 0], [-x1, -x1**3]]`` with
    ``theta = [1, 0.5]`` and a disturbance bounded by 1.5.
    """
    return SystemModel(
        n=2,
        p=2,
        drift_fn=_benchmark_drift,
        regressor_fn=_benchmark_regressor,
        theta_true=np.asarray(theta, dtype=float),
        d_bar=d_bar,
        name="benchmark",
    )


@dataclass(frozen=True)
class RegressorTerm:
    """One monomial ``coeff * x[state] ** power`` added to ``Y[row, col]``."""

    row: int
    col: int
    state: int
    power: int
    coeff: float


def custom_model(
    drift_matrix: Sequence[Sequence[float]],
    regressor_terms: Sequence[RegressorTerm],
    theta: Sequence[float],
    d_bar: float,
) -> SystemModel:
    """Build a plant with linear drift and a monomial regressor.

    Args:
        drift_matrix: ``A`` in ``f(t, x) = A x``.
        regressor_terms: Monomials making up ``Y``.  Every power must be at
            least 1 so that ``Y(t, 0) = 0``.
        theta: True parameter vector; its length fixes ``p``.
        d_bar: Disturbance bound.

    Raises:
        InvalidInputError: If ``A`` is not square, a term indexes outside
            ``Y``, or a power is below 1.
    """
    A = np.asarray(drift_matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"drift_matrix must be square, got shape {A.shape}")
    n = A.shape[0]
    p = len(theta)
    terms = tuple(regressor_terms)
    for term in terms:
        if not (0 <= term.row < n and 0 <= term.col < p and 0 <= term.state < n):
            raise InvalidInputError(f"regressor term {term} indexes outside a {n}x{p} regressor")
        if term.power < 1:
            raise InvalidInputError(f"regressor term {term} must have power >= 1 so Y(t, 0) = 0")

    def drift_fn(t: float, x: np.ndarray) -> np.ndarray:
        return A @ x

    def regressor_fn(t: float, x: np.ndarray) -> np.ndarray:
        Y = np.zeros((n, p))
        for term in terms:
            Y[term.row, term.col] += term.coeff * x[term.state] ** term.power
        return Y

    return SystemModel(
        n=n,
        p=p,
        drift_fn=drift_fn,
        regressor_fn=regressor_fn,
        theta_true=np.asarray(theta, dtype=float),
        d_bar=d_bar,
    )


@dataclass(frozen=True)
class DesiredTrajectory:
    """Sinusoidal reference in phase-variable form.

    Component ``k`` is ``A * w**k * sin(w t + k pi / 2)``, so each component
    is the derivative of the previous one.  ``A = 1, w = 2`` gives
    ``[sin 2t, 2 cos 2t]``.
    """

    n: int = 2
    amplitude: float = 1.0
    frequency: float = 2.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInputError(f"trajectory dimension must be positive, got {self.n}")
        if self.amplitude < 0 or self.frequency <= 0:
            raise InvalidInputError(
                f"need amplitude >= 0 and frequency > 0, got {self.amplitude}, {self.frequency}"
            )

    @property
    def sup_bound(self) -> float:
        """Sup-norm bound ``x_bar_d`` of ``value(t)``."""
        return self.amplitude * max(self.frequency**k for k in range(self.n))

    @property
    def rate_bound(self) -> float:
        """Sup-norm bound of ``rate(t)``."""
        return self.amplitude * max(self.frequency ** (k + 1) for k in range(self.n))

    def value(self, t: float) -> np.ndarray:
        k = np.arange(self.n)
        return self.amplitude * self.frequency**k * np.sin(self.frequency * t + k * np.pi / 2)

    def rate(self, t: float) -> np.ndarray:
        k = np.arange(self.n)
        return self.amplitude * self.frequency ** (k + 1) * np.cos(self.frequency * t + k * np.pi / 2)

    def desired(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x_d(t), x_d'(t))``."""
        return self.value(t), self.rate(t)


@dataclass
class DisturbanceGenerator:
    """Seeded sample-and-hold uniform disturbance.

    Sample ``k`` covers ``[k * hold_step, (k + 1) * hold_step)``.  Draws are
    ``d_bar * U(-1, 1)`` so generators that differ only in ``d_bar`` emit
    proportional sequences.  One instance serves one consumer.
    """

    seed: int
    d_bar: float
    hold_step: float
    n: int = 2
    _rng: np.random.Generator = field(init=False, repr=False)
    _index: int = field(init=False, default=-1, repr=False)
    _current: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.hold_step <= 0:
            raise InvalidInputError(f"hold_step must be positive, got {self.hold_step}")
        if self.d_bar < 0:
            raise InvalidInputError(f"d_bar must be nonnegative, got {self.d_bar}")
        self._restart()

    def _restart(self) -> None:
        self._rng = np.random.default_rng(self.seed)
        self._index = -1
        self._current = np.zeros(self.n)

    def sample(self, t: float) -> np.ndarray:
        """Return the held disturbance at time *t*."""
        k = int(math.floor(t / self.hold_step + 1e-9))
        if k < self._index:
            # Going backwards replays the stream from the seed.
            self._restart()
        while self._index < k:
            self._current = self.d_bar * self._rng.uniform(-1.0, 1.0, size=self.n)
            self._index += 1
        return self._current.copy()


def sample_disturbance(gen: DisturbanceGenerator, t: float) -> np.ndarray:
    """Draw the disturbance for time *t* from *gen*."""
    return gen.sample(t)


def desired(trajectory: DesiredTrajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate *trajectory* at *t*; ``t`` must be nonnegative."""
    if t < 0:
        raise InvalidInputError(f"desired trajectory is defined for t >= 0, got {t}")
    return trajectory.desired(t)


def _box_bounds(box: float | Sequence[tuple[float, float]], n: int) -> list[tuple[float, float]]:
    if isinstance(box, (int, float)):
        bounds = [(-float(box), float(box))] * n
    else:
        bounds = [(float(lo), float(hi)) for lo, hi in box]
    if len(bounds) != n:
        raise InvalidInputError(f"operating box has {len(bounds)} axes, model has {n}")
    for lo, hi in bounds:
        if not lo < hi:
            raise InvalidInputError(f"operating box axis [{lo}, {hi}] is empty")
        if not lo <= 0.0 <= hi:
            raise InvalidInputError(f"operating box axis [{lo}, {hi}] must contain the origin")
    return bounds


def lipschitz_bounds(
    model: SystemModel,
    box: float | Sequence[tuple[float, float]] = 3.0,
    grid_points: int = 41,
    times: Sequence[float] = (0.0,),
) -> tuple[float, float, float]:
    """Estimate ``(L_f, L_Y, Y_bar)`` on an axis-aligned operating box.

    The drift constant is the largest spectral norm of a central-difference
    Jacobian over the grid.  For the regressor, ``sqrt(sum_i ||dY/dx_i||^2)``
    bounds ``||Y(x) - Y(y)|| / ||x - y||`` along any direction.  ``Y_bar``
    is the largest spectral norm of ``Y`` on the grid.  Grids built with
    ``2k + 1`` points contain the ``k + 1`` grid, so refinement never lowers
    an estimate.

    Args:
        model: The plant.
        box: Half-width of ``||x||_inf <= box`` or explicit per-axis bounds.
        grid_points: Samples per axis (at least 2).
        times: Time instants to sweep for time-varying models.

    Raises:
        InvalidInputError: If the box is empty, misses the origin, or the
            grid has fewer than two points per axis.
    """
    bounds = _box_bounds(box, model.n)
    if grid_points < 2:
        raise InvalidInputError(f"grid_points must be at least 2, got {grid_points}")
    m = grid_points
    while m**model.n > _MAX_GRID_POINTS and m > 3:
        m = (m + 1) // 2
    if m != grid_points:
        logger.warning(
            "Lipschitz grid coarsened from %d to %d points per axis for n=%d",
            grid_points, m, model.n,
        )

    axes = [np.linspace(lo, hi, m) for lo, hi in bounds]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.n)
    width = max(hi - lo for lo, hi in bounds)
    delta = 1e-6 * max(1.0, width)
    eye = np.eye(model.n) * delta

    L_f = 0.0
    L_Y = 0.0
    Y_bar = 0.0
    for t in times:
        for x in points:
            Y_bar = max(Y_bar, float(np.linalg.norm(model.regressor(t, x), 2)))
            jac = np.empty((model.n, model.n))
            dY_sq = 0.0
            for i in range(model.n):
                jac[:, i] = (model.drift(t, x + eye[i]) - model.drift(t, x - eye[i])) / (2 * delta)
                dY = (model.regressor(t, x + eye[i]) - model.regressor(t, x - eye[i])) / (2 * delta)
                dY_sq += float(np.linalg.norm(dY, 2)) ** 2
            L_f = max(L_f, float(np.linalg.norm(jac, 2)))
            L_Y = max(L_Y, math.sqrt(dY_sq))
    return L_f, L_Y, Y_bar
