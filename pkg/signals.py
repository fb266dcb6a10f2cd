"""Filtered regressor pairs ``(U_f, Y_f)`` for memory regressor extension.

Two realizations are provided.  Windowed integration keeps a short buffer of
measured samples and differences window integrals of ``x' - f - u`` and of
``Y``.  The exponential filter runs ``h(t) = beta exp(-beta t)`` as a
first-order state, handling ``x'`` by parts so no derivative of the state is
measured.  Both are zero in GPS-denied phases and restart at every
GPS-available anchor.

With a disturbance-free plant both realizations satisfy ``U_f = Y_f theta``
up to quadrature error; ``xi_f`` carries the disturbance part when the
simulator knows it.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field

import numpy as np

from dynamics import SystemModel
from errors import InvalidInputError, NotWarmError, OrderingError

logger = logging.getLogger(__name__)

WINDOWED = "windowed"
EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class FilterConfig:
    """Settings for the filtered-pair construction.

    Attributes:
        variant: ``"windowed"`` or ``"exponential"``.
        beta: Exponential filter rate.
        window: Integration window ``dt`` in seconds.
        quadrature_step: Sample spacing the buffer expects.
    """

    variant: str = WINDOWED
    beta: float = 4.0
    window: float = 0.25
    quadrature_step: float = 1e-3

    def __post_init__(self) -> None:
        if self.variant not in (WINDOWED, EXPONENTIAL):
            raise InvalidInputError(f"unknown filter variant {self.variant!r}")
        if self.window <= 0 or self.beta <= 0:
            raise InvalidInputError(f"window and beta must be positive, got {self.window}, {self.beta}")
        if not 0 < self.quadrature_step <= self.window / 4:
            raise InvalidInputError(
                f"quadrature_step must be in (0, window/4], got {self.quadrature_step} "
                f"for window {self.window}"
            )


@dataclass
class FilteredPair:
    """One sample of the filtered relation ``U_f = Y_f theta + xi_f``."""

    U_f: np.ndarray
    Y_f: np.ndarray
    t: float
    xi_f: np.ndarray | None = None

    @classmethod
    def zeros(cls, n: int, p: int, t: float) -> FilteredPair:
        return cls(np.zeros(n), np.zeros((n, p)), t, np.zeros(n))

    def is_zero(self) -> bool:
        return not (np.any(self.U_f) or np.any(self.Y_f))


@dataclass
class SampleBuffer:
    """Measured samples of one GPS-available interval.

    Alongside each state the buffer keeps running integrals from the anchor
    of ``f + u``, of ``Y`` and, in diagnostic mode, of ``d``.  Window
    integrals are differences of running integrals, linearly interpolated
    between stored steps.  Samples older than ``2 * window + slack`` behind
    the newest are dropped; the second window is needed because the steady
    branch differences two consecutive windows.
    """

    model: SystemModel
    window: float
    slack: float = 0.0
    anchor: float = 0.0
    _t: list[float] = field(default_factory=list, repr=False)
    _x: list[np.ndarray] = field(default_factory=list, repr=False)
    _fu: list[np.ndarray] = field(default_factory=list, repr=False)
    _Y: list[np.ndarray] = field(default_factory=list, repr=False)
    _d: list[np.ndarray | None] = field(default_factory=list, repr=False)
    _cum_fu: list[np.ndarray] = field(default_factory=list, repr=False)
    _cum_Y: list[np.ndarray] = field(default_factory=list, repr=False)
    _cum_d: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.window <= 0:
            raise InvalidInputError(f"window must be positive, got {self.window}")

    def __len__(self) -> int:
        return len(self._t)

    @property
    def span(self) -> float:
        """Time covered by the stored samples."""
        return self._t[-1] - self._t[0] if self._t else 0.0

    @property
    def last_time(self) -> float | None:
        return self._t[-1] if self._t else None

    def reset(self, anchor: float) -> None:
        """Drop every sample and restart integration at *anchor*."""
        self.anchor = anchor
        for store in (self._t, self._x, self._fu, self._Y, self._d,
                      self._cum_fu, self._cum_Y, self._cum_d):
            store.clear()

    def push(
        self,
        t: float,
        x: np.ndarray,
        u: np.ndarray,
        d: np.ndarray | None = None,
        increments: tuple[np.ndarray, np.ndarray, np.ndarray | None] | None = None,
    ) -> None:
        """Store a sample; see ``push_sample``."""
        if self._t and t <= self._t[-1]:
            raise OrderingError(f"sample time {t} does not follow {self._t[-1]}")
        x = np.asarray(x, dtype=float)
        fu = self.model.drift(t, x) + np.asarray(u, dtype=float)
        Y = self.model.regressor(t, x)
        d_arr = None if d is None else np.asarray(d, dtype=float)

        if not self._t:
            zero_n = np.zeros(self.model.n)
            cum_fu, cum_Y, cum_d = zero_n, np.zeros_like(Y), zero_n
        elif increments is not None:
            inc_fu, inc_Y, inc_d = increments
            cum_fu = self._cum_fu[-1] + inc_fu
            cum_Y = self._cum_Y[-1] + inc_Y
            cum_d = self._cum_d[-1] + (inc_d if inc_d is not None else 0.0)
        else:
            dt = t - self._t[-1]
            cum_fu = self._cum_fu[-1] + 0.5 * dt * (self._fu[-1] + fu)
            cum_Y = self._cum_Y[-1] + 0.5 * dt * (self._Y[-1] + Y)
            prev_d = self._d[-1]
            if d_arr is not None and prev_d is not None:
                cum_d = self._cum_d[-1] + 0.5 * dt * (prev_d + d_arr)
            else:
                cum_d = self._cum_d[-1]

        self._t.append(t)
        self._x.append(x)
        self._fu.append(fu)
        self._Y.append(Y)
        self._d.append(d_arr)
        self._cum_fu.append(cum_fu)
        self._cum_Y.append(cum_Y)
        self._cum_d.append(cum_d)
        self._evict(t)

    def _evict(self, t: float) -> None:
        horizon = t - 2.0 * self.window - self.slack
        # Keep one sample at or before the horizon so interpolation still works.
        drop = bisect.bisect_right(self._t, horizon) - 1
        if drop > 0:
            for store in (self._t, self._x, self._fu, self._Y, self._d,
                          self._cum_fu, self._cum_Y, self._cum_d):
                del store[:drop]

    def _interp(self, store: list[np.ndarray], s: float) -> np.ndarray:
        i = bisect.bisect_right(self._t, s)
        if i <= 0:
            return store[0]
        if i >= len(self._t):
            return store[-1]
        t0, t1 = self._t[i - 1], self._t[i]
        w = (s - t0) / (t1 - t0)
        return (1.0 - w) * store[i - 1] + w * store[i]

    def window_integrals(self, s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(I_u(s), I_y(s), I_d(s))`` over ``[max(s - window, anchor), s]``.

        All three vanish for ``s <= anchor``.
        """
        n, p = self.model.n, self.model.p
        if s <= self.anchor:
            return np.zeros(n), np.zeros((n, p)), np.zeros(n)
        lo = max(s - self.window, self.anchor)
        x_s, x_lo = self._interp(self._x, s), self._interp(self._x, lo)
        I_u = x_s - x_lo - (self._interp(self._cum_fu, s) - self._interp(self._cum_fu, lo))
        I_y = self._interp(self._cum_Y, s) - self._interp(self._cum_Y, lo)
        I_d = self._interp(self._cum_d, s) - self._interp(self._cum_d, lo)
        return I_u, I_y, I_d


def push_sample(
    buf: SampleBuffer,
    t: float,
    x: np.ndarray,
    u: np.ndarray,
    d: np.ndarray | None = None,
    increments: tuple[np.ndarray, np.ndarray, np.ndarray | None] | None = None,
) -> None:
    """Append a measured sample to *buf*.

    Running integrals advance by the trapezoid rule unless the caller hands
    in the step *increments* of ``(f + u, Y, d)`` from its own integrator.

    Raises:
        OrderingError: If *t* does not exceed the last stored time.
    """
    buf.push(t, x, u, d=d, increments=increments)


def windowed_pair(buf: SampleBuffer, t: float, available: bool = True) -> FilteredPair:
    """Windowed-integration pair at time *t*.

    For ``t`` within one window of the anchor the integrals accumulate from
    the anchor; afterwards ``U_f = I_u(t) - I_u(t - window)`` and likewise
    for ``Y_f``.  Denied phases yield zeros.

    Raises:
        NotWarmError: If *t* is not past the anchor or the buffer does not
            reach back far enough.
    """
    n, p = buf.model.n, buf.model.p
    if not available:
        return FilteredPair.zeros(n, p, t)
    if len(buf) < 2 or t <= buf.anchor:
        raise NotWarmError(f"buffer not warm at t={t} (anchor {buf.anchor}, {len(buf)} samples)")
    needed = max(t - 2.0 * buf.window, buf.anchor)
    if buf._t[0] > needed + 1e-12 or t > buf._t[-1] + 1e-12:
        raise NotWarmError(f"buffer spans [{buf._t[0]}, {buf._t[-1]}], need [{needed}, {t}]")

    I_u, I_y, I_d = buf.window_integrals(t)
    if t <= buf.anchor + buf.window:
        return FilteredPair(I_u, I_y, t, I_d)
    J_u, J_y, J_d = buf.window_integrals(t - buf.window)
    return FilteredPair(I_u - J_u, I_y - J_y, t, I_d - J_d)


@dataclass
class ExponentialFilterState:
    """State of the exponential filter.

    ``w = U_f - beta x`` avoids differentiating ``x``:
    ``w' = -beta (f + u) - beta (w + beta x)`` and ``Y_f' = beta (Y - Y_f)``.
    ``xi_f`` follows ``xi_f' = beta (d - xi_f)`` when ``d`` is known.
    """

    model: SystemModel
    beta: float
    w: np.ndarray = field(init=False)
    Y_f: np.ndarray = field(init=False)
    xi_f: np.ndarray = field(init=False)
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise InvalidInputError(f"beta must be positive, got {self.beta}")
        self.w = np.zeros(self.model.n)
        self.Y_f = np.zeros((self.model.n, self.model.p))
        self.xi_f = np.zeros(self.model.n)

    def reset(self, t: float, x: np.ndarray) -> None:
        """Zero the filter outputs at a GPS-available anchor."""
        self.t = t
        self.w = -self.beta * np.asarray(x, dtype=float)
        self.Y_f = np.zeros((self.model.n, self.model.p))
        self.xi_f = np.zeros(self.model.n)

    def U_f(self, x: np.ndarray) -> np.ndarray:
        return self.w + self.beta * np.asarray(x, dtype=float)

    def load(self, t: float, w: np.ndarray, Y_f: np.ndarray, xi_f: np.ndarray) -> None:
        """Take outputs integrated elsewhere, e.g. inside a composite state."""
        self.t = t
        self.w = np.array(w, dtype=float)
        self.Y_f = np.array(Y_f, dtype=float).reshape(self.model.n, self.model.p)
        self.xi_f = np.array(xi_f, dtype=float)

    def pair(self, x: np.ndarray) -> FilteredPair:
        return FilteredPair(self.U_f(x), self.Y_f.copy(), self.t, self.xi_f.copy())

    def rates(
        self,
        t: float,
        x: np.ndarray,
        u: np.ndarray,
        w: np.ndarray,
        Y_f: np.ndarray,
        xi_f: np.ndarray,
        d: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Time derivatives of ``(w, Y_f, xi_f)`` at the given state."""
        b = self.beta
        fu = self.model.drift(t, x) + u
        w_rate = -b * fu - b * (w + b * x)
        Y_rate = b * (self.model.regressor(t, x) - Y_f)
        xi_rate = b * (d - xi_f) if d is not None else np.zeros_like(xi_f)
        return w_rate, Y_rate, xi_rate


def exponential_pair(
    state: ExponentialFilterState,
    t: float,
    x: np.ndarray,
    u: np.ndarray,
    dt: float | None = None,
    d: np.ndarray | None = None,
    available: bool = True,
) -> FilteredPair:
    """Advance the exponential filter to *t* and return its pair.

    The filter takes one classical Runge-Kutta step of length *dt* (default
    ``t - state.t``) with ``x``, ``u`` and ``d`` held over the step.  Denied
    phases hold the outputs at zero.
    """
    n, p = state.model.n, state.model.p
    if not available:
        state.t = t
        state.reset(t, x)
        return FilteredPair.zeros(n, p, t)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (n,) or u.shape != (n,):
        raise InvalidInputError(f"x and u must have shape ({n},)")
    h = t - state.t if dt is None else dt
    if h > 0:
        def rate(w, Y_f, xi_f):
            return state.rates(t, x, u, w, Y_f, xi_f, d)

        k1 = rate(state.w, state.Y_f, state.xi_f)
        k2 = rate(*(s + 0.5 * h * k for s, k in zip((state.w, state.Y_f, state.xi_f), k1)))
        k3 = rate(*(s + 0.5 * h * k for s, k in zip((state.w, state.Y_f, state.xi_f), k2)))
        k4 = rate(*(s + h * k for s, k in zip((state.w, state.Y_f, state.xi_f), k3)))
        state.w, state.Y_f, state.xi_f = (
            s + (h / 6.0) * (a + 2 * b + 2 * c + e)
            for s, a, b, c, e in zip((state.w, state.Y_f, state.xi_f), k1, k2, k3, k4)
        )
    state.t = t
    return state.pair(x)
