"""Shared fixtures for the GPS dwell-time simulator tests."""

from __future__ import annotations

import numpy as np
import pytest

from dynamics import benchmark_model
from scenario import ScenarioConfig, build_bundle, run_scenario
from tests.helpers import short_config, switching_config


@pytest.fixture()
def benchmark():
    """The benchmark plant with its default parameters."""
    return benchmark_model()


@pytest.fixture()
def quiet_benchmark():
    """The benchmark plant without disturbance."""
    return benchmark_model(d_bar=0.0)


@pytest.fixture()
def default_bundle():
    """Simulation objects for the default scenario."""
    return build_bundle(switching_config(t_end=9.0))


@pytest.fixture(scope="module")
def switching_run():
    """Two-second default-gain run that crosses at least one phase switch.

    Module-scoped: one integration shared by every test in a module.
    """
    return run_scenario(switching_config(t_end=2.0), write=False)


@pytest.fixture(scope="module")
def clean_run():
    """One-second disturbance-free run with a permissive admission gate."""
    cfg = switching_config(
        t_end=1.0,
        model={"d_bar": 0.0},
        estimator={"lambda_bar": 0.0, "lambda_y": 1e-9},
    )
    return run_scenario(cfg, write=False)


@pytest.fixture(scope="module")
def default_run():
    """The default nine-second benchmark run."""
    return run_scenario(ScenarioConfig(), write=False)


@pytest.fixture(scope="module")
def calibrated_run():
    """Disturbance-free ten-second run with three GPS-denied intervals.

    Without disturbance the propagated bound only shrinks, so each
    GPS-denied budget is longer than the last.
    """
    cfg = short_config(t_end=10.0, model={"d_bar": 0.0}, estimator={"lambda_bar": 0.01})
    return run_scenario(cfg, write=False)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
