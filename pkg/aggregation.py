"""History stacks and exponentially weighted integrals.

Both turn a stream of filtered pairs ``(U_f, Y_f)`` into a p-dimensional
information system ``(U_sigma, Y_sigma)`` with ``U_sigma ~= Y_sigma theta``.
Every summand is normalized by ``1 + ||Y_f||_F**2`` so its spectral norm stays
below one.  Both containers restart at each GPS-available anchor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from errors import InvalidInputError
from signals import FilteredPair

logger = logging.getLogger(__name__)

# Numerical PSD floor for lambda_min after symmetrization.
_PSD_TOL = 1e-10


def _summand(pair: FilteredPair) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Y_f = np.asarray(pair.Y_f, dtype=float)
    scale = 1.0 + float(np.sum(Y_f * Y_f))
    xi_f = pair.xi_f if pair.xi_f is not None else np.zeros(Y_f.shape[0])
    return Y_f.T @ pair.U_f / scale, Y_f.T @ Y_f / scale, Y_f.T @ xi_f / scale


def _sym(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def lambda_min(matrix: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of *matrix*."""
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(_sym(matrix))[0])


def _record_peak(history: list[tuple[float, float]], t: float, value: float) -> None:
    # Only new maxima are kept; the first crossing of any level is one of them.
    if not history or value > history[-1][1]:
        history.append((t, value))


@dataclass
class StackEntry:
    t: float
    U_f: np.ndarray
    Y_f: np.ndarray
    xi_f: np.ndarray | None = None
    summand: tuple[np.ndarray, np.ndarray, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.summand = _summand(self.as_pair())

    def as_pair(self) -> FilteredPair:
        return FilteredPair(self.U_f, self.Y_f, self.t, self.xi_f)


@dataclass
class HistoryStack:
    """Concurrent-learning history stack for one GPS-available interval.

    Attributes:
        p: Number of unknown parameters.
        capacity: Maximum number of stored pairs (``N``).
        lambda_threshold: Minimum ``lambda_min`` gain an admission must bring.
        entries: Stored pairs, oldest first.
        pending: Up to ``capacity`` rejected pairs, candidates for a merge.
        history: ``(t, lambda_min)`` at each admission that set a new peak.
    """

    p: int
    capacity: int = 20
    lambda_threshold: float = 0.04
    anchor: float = 0.0
    entries: list[StackEntry] = field(default_factory=list)
    pending: list[StackEntry] = field(default_factory=list)
    history: list[tuple[float, float]] = field(default_factory=list)
    U_sigma: np.ndarray = field(init=False)
    Y_sigma: np.ndarray = field(init=False)
    Xi_sigma: np.ndarray = field(init=False)
    admissions: int = 0

    def __post_init__(self) -> None:
        if self.p < 1 or self.capacity < 1:
            raise InvalidInputError(f"p and capacity must be positive, got {self.p}, {self.capacity}")
        if self.lambda_threshold < 0:
            raise InvalidInputError(f"lambda_threshold must be nonnegative, got {self.lambda_threshold}")
        self._zero()

    def _zero(self) -> None:
        self.U_sigma = np.zeros(self.p)
        self.Y_sigma = np.zeros((self.p, self.p))
        self.Xi_sigma = np.zeros(self.p)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def lambda_min(self) -> float:
        return lambda_min(self.Y_sigma)

    def reset(self, anchor: float) -> None:
        """Empty the stack at the start of a GPS-available interval."""
        self.anchor = anchor
        self.entries.clear()
        self.pending.clear()
        self.history.clear()
        self.admissions = 0
        self._zero()


def _aggregate_entries(entries: list[StackEntry], p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    U, Y, Xi = np.zeros(p), np.zeros((p, p)), np.zeros(p)
    for entry in entries:
        u, y, xi = entry.summand
        U += u
        Y += y
        Xi += xi
    return U, _sym(Y), Xi


def aggregate(stack: HistoryStack) -> tuple[np.ndarray, np.ndarray]:
    """Recompute ``(U_sigma, Y_sigma)`` from the stored entries.

    An empty stack gives zeros.  ``Xi_sigma`` is refreshed as a side effect.
    """
    stack.U_sigma, stack.Y_sigma, stack.Xi_sigma = _aggregate_entries(stack.entries, stack.p)
    return stack.U_sigma.copy(), stack.Y_sigma.copy()


def _best_candidate(
    entries: list[StackEntry], capacity: int, p: int, additions: list[StackEntry]
) -> tuple[list[StackEntry], float]:
    """*entries* with *additions* appended, evicting entries greedily when over capacity."""
    candidate = list(entries)
    total = _aggregate_entries(candidate, p)[1]
    for entry in additions:
        added = entry.summand[1]
        if len(candidate) < capacity:
            candidate.append(entry)
            total = total + added
            continue
        best_i, best_lmin = 0, -math.inf
        # Oldest first so ties evict the oldest entry.
        for i, old in enumerate(candidate):
            value = lambda_min(total - old.summand[1] + added)
            if value > best_lmin + 1e-15:
                best_i, best_lmin = i, value
        total = total - candidate[best_i].summand[1] + added
        candidate = candidate[:best_i] + candidate[best_i + 1:] + [entry]
    return candidate, lambda_min(total)


def _remember_pending(stack: HistoryStack, entry: StackEntry) -> bool:
    """Keep *entry* in the pool of rejected pairs; return True if the pool changed.

    The pool holds at most ``capacity`` pairs.  Once full it is curated like a
    stack without a threshold: the newcomer replaces the entry whose removal
    leaves the pool's information matrix best conditioned, and is dropped if
    every swap would lower the pool's ``lambda_min``.
    """
    if len(stack.pending) < stack.capacity:
        stack.pending.append(entry)
        return True
    before = lambda_min(_aggregate_entries(stack.pending, stack.p)[1])
    candidate, after = _best_candidate(stack.pending, stack.capacity, stack.p, [entry])
    if after < before:
        return False
    stack.pending = candidate
    return True


def try_admit(stack: HistoryStack, pair: FilteredPair) -> bool:
    """Admit *pair* if it raises ``lambda_min(Y_sigma)`` by more than the threshold.

    When the stack is full the candidate replaces the entry whose removal
    leaves the largest ``lambda_min``.  A rejected pair joins the pending
    pool.  Rank-one summands, as produced by a regressor with a single
    non-zero row, rarely clear the gate on their own, so the gate is also
    tried on the stack merged with the whole pool.  The merge is attempted
    only when ``lambda_min`` of the stack plus the pool clears the gate,
    which every subset needs, and only when the pool has just changed.  A
    successful merge counts as one admission.

    Returns:
        True if the stack changed.
    """
    if pair.is_zero():
        logger.debug("t=%.4f: zero pair rejected", pair.t)
        return False
    current = stack.lambda_min
    entry = StackEntry(pair.t, np.array(pair.U_f, dtype=float), np.array(pair.Y_f, dtype=float),
                       None if pair.xi_f is None else np.array(pair.xi_f, dtype=float))

    candidate, cand_lmin = _best_candidate(stack.entries, stack.capacity, stack.p, [entry])
    if cand_lmin - current <= stack.lambda_threshold and _remember_pending(stack, entry):
        pooled = stack.Y_sigma + _aggregate_entries(stack.pending, stack.p)[1]
        if lambda_min(pooled) - current > stack.lambda_threshold:
            candidate, cand_lmin = _best_candidate(stack.entries, stack.capacity, stack.p, stack.pending)

    gain = cand_lmin - current
    if gain <= stack.lambda_threshold:
        logger.debug("t=%.4f: rejected, lambda_min gain %.4g", pair.t, gain)
        return False

    added = [e for e in candidate if not any(e is old for old in stack.entries)]
    stack.entries = candidate
    stack.pending = [e for e in stack.pending if not any(e is new for new in candidate)]
    aggregate(stack)
    stack.admissions += 1
    _record_peak(stack.history, pair.t, stack.lambda_min)
    logger.debug(
        "t=%.4f: admitted %d pair(s), lambda_min %.4g -> %.4g (%d stored, %d pending)",
        pair.t, len(added), current, stack.lambda_min, len(stack.entries), len(stack.pending),
    )
    return True


@dataclass
class EwState:
    """Exponentially weighted integrals of the normalized summands.

    Older data is discounted by ``exp(-alpha (t - tau))``, so the most recent
    samples carry full weight.
    """

    p: int
    alpha: float = 0.1
    anchor: float = 0.0
    U_sigma: np.ndarray = field(init=False)
    Y_sigma: np.ndarray = field(init=False)
    Xi_sigma: np.ndarray = field(init=False)
    history: list[tuple[float, float]] = field(default_factory=list)
    _last: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise InvalidInputError(f"alpha must be nonnegative, got {self.alpha}")
        self.reset(self.anchor)

    @property
    def lambda_min(self) -> float:
        return lambda_min(self.Y_sigma)

    def reset(self, anchor: float) -> None:
        self.anchor = anchor
        self.U_sigma = np.zeros(self.p)
        self.Y_sigma = np.zeros((self.p, self.p))
        self.Xi_sigma = np.zeros(self.p)
        self.history = []
        self._last = None


def ew_update(state: EwState, pair: FilteredPair, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Advance the weighted integrals by one trapezoid step of length *dt*.

    The first call after a reset only records the integrand.
    """
    if dt < 0:
        raise InvalidInputError(f"dt must be nonnegative, got {dt}")
    current = _summand(pair)
    if state._last is not None and dt > 0:
        decay = math.exp(-state.alpha * dt)
        half = 0.5 * dt
        prev_u, prev_y, prev_xi = state._last
        state.U_sigma = decay * state.U_sigma + half * (decay * prev_u + current[0])
        state.Y_sigma = _sym(decay * state.Y_sigma + half * (decay * prev_y + current[1]))
        state.Xi_sigma = decay * state.Xi_sigma + half * (decay * prev_xi + current[2])
    state._last = current
    _record_peak(state.history, pair.t, state.lambda_min)
    return state.U_sigma.copy(), state.Y_sigma.copy()


def excitation_time(info: HistoryStack | EwState, lambda_y: float, t: float) -> float | None:
    """First time in the current interval at which ``lambda_min(Y_sigma) > lambda_y``.

    Returns None if the level has not been crossed by time *t*.
    """
    for when, value in info.history:
        if when > t:
            break
        if value > lambda_y and value > _PSD_TOL:
            return when
    return None
