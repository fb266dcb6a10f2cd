"""Tests for scheduler.py: dwell budgets and the phase state machine."""

from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from errors import InfeasibleStartError, InvalidInputError
from scheduler import (
    Phase,
    PhaseKind,
    SwitchRecord,
    advance_phase,
    build_constants,
    decay_envelope,
    initial_phase,
    max_denied_dwell,
    min_available_dwell,
)
from tests.helpers import make_constants


# ── TestAnalysisConstants ────────────────


class TestAnalysisConstants:
    def test_derived_rates(self):
        consts = make_constants()
        assert consts.k_a == pytest.approx(1.0)
        assert consts.L_1 == pytest.approx(1.0)
        assert consts.k_u == pytest.approx(1.5)

    def test_theta_bound_enters_growth_rate(self):
        consts = make_constants(L_Y=2.0, theta_bound=0.5)
        assert consts.L_1 == pytest.approx(2.0)
        assert consts.k_u == pytest.approx(2.0)

    def test_build_from_gain_eigenvalues(self):
        consts = build_constants(1.0, 27.0, 27.2, 1.5, k1_min=5.0, k2_min=3.0, V_l=0.05, V_u=4.0, eta=3.0)
        assert consts.k1_lower == pytest.approx(4.0)
        assert consts.k_a == pytest.approx(1.5)

    def test_weak_observer_gain_rejected(self):
        with pytest.raises(InvalidInputError, match="must exceed L_f"):
            build_constants(1.0, 0.0, 0.0, 1.0, k1_min=0.5, k2_min=2.0, V_l=0.3, V_u=2.0, eta=3.0)

    def test_ceiling_above_ball_rejected(self):
        with pytest.raises(InvalidInputError, match="eta"):
            make_constants(V_u=5.0, eta=3.0)

    def test_target_above_ceiling_rejected(self):
        with pytest.raises(InvalidInputError):
            make_constants(V_l=2.5, V_u=2.0)

    def test_negative_lipschitz_rejected(self):
        with pytest.raises(InvalidInputError):
            make_constants(L_f=-1.0)


# ── TestMinAvailableDwell ────────────────


class TestMinAvailableDwell:
    def test_already_at_target(self):
        assert min_available_dwell(0.3, make_constants()) == 0.0

    def test_below_target(self):
        assert min_available_dwell(0.1, make_constants()) == 0.0

    def test_hand_evaluation(self):
        assert min_available_dwell(3.0, make_constants()) == pytest.approx(math.log(10.0))

    def test_faster_decay(self):
        consts = make_constants(k1_lower=4.0, k2_lower=4.0)
        assert min_available_dwell(math.e**2 * 0.3, consts) == pytest.approx(1.0)

    def test_envelope_reaches_target(self):
        consts = make_constants()
        dwell = min_available_dwell(3.0, consts)
        assert decay_envelope(3.0, dwell, consts) == pytest.approx(consts.V_l)

    @pytest.mark.parametrize("V", [0.0, -1.0])
    def test_nonpositive_rejected(self, V):
        with pytest.raises(InvalidInputError):
            min_available_dwell(V, make_constants())


# ── TestMaxDeniedDwell ────────────────


class TestMaxDeniedDwell:
    def test_disturbance_free(self):
        consts = make_constants(d_bar=0.0)
        assert max_denied_dwell(0.5, 0.0, consts) == pytest.approx(math.log(4.0) / 1.5)

    def test_hand_evaluation(self):
        consts = make_constants(k2_lower=1.0)
        assert max_denied_dwell(0.5, 0.0, consts) == pytest.approx(math.log(2.5), abs=1e-4)

    def test_at_ceiling_is_zero(self):
        assert max_denied_dwell(2.0, 0.0, make_constants()) == pytest.approx(0.0)

    def test_above_ceiling_infeasible(self):
        with pytest.raises(InfeasibleStartError):
            max_denied_dwell(2.1, 0.0, make_constants())

    def test_negative_V_rejected(self):
        with pytest.raises(InvalidInputError):
            max_denied_dwell(-0.1, 0.0, make_constants())

    def test_no_growth_rate_rejected(self):
        with pytest.raises(InvalidInputError):
            max_denied_dwell(0.5, 0.0, make_constants(L_f=0.0))

    def test_smaller_theta_bound_extends_budget(self):
        consts = make_constants(L_Y=1.0, Y_bar=1.0)
        assert max_denied_dwell(0.5, 0.5, consts) > max_denied_dwell(0.5, 1.0, consts)

    def test_larger_disturbance_shortens_budget(self):
        small = max_denied_dwell(0.5, 0.0, make_constants(d_bar=1.0))
        large = max_denied_dwell(0.5, 0.0, make_constants(d_bar=2.0))
        assert large < small

    def test_higher_ceiling_extends_budget(self):
        low = max_denied_dwell(0.5, 0.0, make_constants(V_u=2.0))
        high = max_denied_dwell(0.5, 0.0, make_constants(V_u=2.5))
        assert high > low


# ── TestDeniedBudgetSigns ────────────────


def _benchmark_constants(**overrides):
    values = dict(L_f=1.0, L_Y=27.02, Y_bar=27.17, d_bar=1.5, k1_lower=4.0, k2_lower=10.0,
                  V_l=0.05, V_u=4.0, eta=3.0)
    values.update(overrides)
    return make_constants(**values)


class TestDeniedBudgetSigns:
    """Finite-difference signs of the budget on 10 x 10 grids around the benchmark."""

    V_GRID = np.linspace(0.01, 3.5, 10)

    def test_decreasing_in_theta_bound(self):
        consts = _benchmark_constants()
        step = 1e-4
        for V in self.V_GRID:
            for bound in np.linspace(0.25, 3.0, 10):
                here = max_denied_dwell(V, bound, consts)
                assert max_denied_dwell(V, bound + step, consts) < here

    def test_decreasing_in_disturbance(self):
        step = 1e-4
        for V in self.V_GRID:
            for d_bar in np.linspace(0.0, 1.5, 10):
                here = max_denied_dwell(V, 1.118, _benchmark_constants(d_bar=d_bar))
                assert max_denied_dwell(V, 1.118, _benchmark_constants(d_bar=d_bar + step)) < here

    def test_increasing_in_ceiling(self):
        step = 1e-4
        for V in self.V_GRID:
            for V_u in np.linspace(3.55, 4.4, 10):
                here = max_denied_dwell(V, 1.118, _benchmark_constants(V_u=V_u))
                assert max_denied_dwell(V, 1.118, _benchmark_constants(V_u=V_u + step)) > here


# ── TestPhases ────────────────


class TestPhases:
    def test_initial_phase_contracts(self):
        phase = initial_phase(3.0, make_constants())
        assert phase.kind is PhaseKind.AVAILABLE
        assert phase.sigma == 0
        assert phase.budget == pytest.approx(math.log(10.0))

    def test_initial_phase_floor(self):
        phase = initial_phase(3.0, make_constants(), available_floor=3.0)
        assert phase.budget == 3.0

    def test_unchanged_before_budget(self):
        phase = Phase(PhaseKind.AVAILABLE, 0, 0.0, 3.0)
        assert advance_phase(phase, 2.9, 0.2, 0.0, make_constants()) is phase

    def test_available_to_denied(self):
        consts = make_constants()
        phase = Phase(PhaseKind.AVAILABLE, 0, 0.0, 3.0)
        nxt = advance_phase(phase, 3.0, 0.5, 0.0, consts)
        assert nxt.kind is PhaseKind.DENIED
        assert nxt.sigma == 0
        assert nxt.t_start == 3.0
        assert nxt.budget == pytest.approx(max_denied_dwell(0.5, 0.0, consts))

    def test_denied_scale(self):
        consts = make_constants()
        phase = Phase(PhaseKind.AVAILABLE, 0, 0.0, 3.0)
        nxt = advance_phase(phase, 3.0, 0.5, 0.0, consts, denied_scale=0.5)
        assert nxt.budget == pytest.approx(0.5 * max_denied_dwell(0.5, 0.0, consts))

    def test_denied_to_available_increments_sigma(self):
        phase = Phase(PhaseKind.DENIED, 0, 3.0, 0.5)
        nxt = advance_phase(phase, 3.5, 3.0, 0.0, make_constants(), available_floor=1.0)
        assert nxt.kind is PhaseKind.AVAILABLE
        assert nxt.sigma == 1
        assert nxt.budget == pytest.approx(math.log(10.0))

    def test_available_floor_applies(self):
        phase = Phase(PhaseKind.DENIED, 2, 3.0, 0.5)
        nxt = advance_phase(phase, 3.5, 0.1, 0.0, make_constants(), available_floor=3.0)
        assert nxt.budget == 3.0
        assert nxt.sigma == 3

    def test_zero_budget_warns(self, caplog):
        phase = Phase(PhaseKind.AVAILABLE, 0, 0.0, 1.0)
        with caplog.at_level(logging.WARNING, logger="scheduler"):
            nxt = advance_phase(phase, 1.0, 2.0, 0.0, make_constants())
        assert nxt.budget == 0.0
        assert "budget is zero" in caplog.text

    def test_time_before_start_rejected(self):
        phase = Phase(PhaseKind.AVAILABLE, 0, 1.0, 3.0)
        with pytest.raises(InvalidInputError):
            advance_phase(phase, 0.5, 0.2, 0.0, make_constants())

    def test_alternation(self):
        consts = make_constants()
        phase = initial_phase(3.0, consts)
        kinds = [phase.kind]
        t = 0.0
        for _ in range(6):
            t = phase.t_start + phase.budget
            phase = advance_phase(phase, t, 0.5, 0.0, consts)
            kinds.append(phase.kind)
        assert kinds == [PhaseKind.AVAILABLE, PhaseKind.DENIED] * 3 + [PhaseKind.AVAILABLE]
        assert phase.sigma == 3

    def test_switch_record_row(self):
        row = SwitchRecord(1, PhaseKind.DENIED, 3.0, 0.4, 0.2, 0.9).as_row()
        assert row == {"sigma": 1, "kind": "denied", "t": 3.0, "V": 0.4, "theta_bound": 0.2, "budget": 0.9}
