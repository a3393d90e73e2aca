"""
Pytest configuration for QuatTrack test suite
"""

import os
import sys

import numpy as np
import pytest

# Add project root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.attitude.tracking import RobustGains  # noqa: E402
from core.simulation.scenarios import (  # noqa: E402
    case_study,
    benchmark_gains,
    benchmark_inertia,
    perturbed_scenario,
)
from core.simulation.sim_engine import simulate  # noqa: E402

TEST_SEED = 12345


@pytest.fixture
def rng():
    """Seeded random generator for randomized property tests."""
    return np.random.default_rng(TEST_SEED)


@pytest.fixture
def inertia():
    """Benchmark spacecraft inertia diag(4.250, 4.337, 3.664)."""
    return benchmark_inertia()


@pytest.fixture
def gains():
    """Benchmark gains: alpha = 1, k_q = k1 = k_omega = 3."""
    return benchmark_gains()


@pytest.fixture
def robust_gains(gains):
    return RobustGains(base=gains, k_delta=1000.0, delta_bound=np.sqrt(3.0))


@pytest.fixture
def scenario_dict():
    """Minimal valid robust scenario document, short horizon."""
    return {
        "name": "unit_test",
        "inertia": [4.250, 4.337, 3.664],
        "mode": "robust",
        "gains": {"alpha": 1.0, "k_q": 3.0, "k1": 3.0, "k_omega": 3.0, "k_delta": 1000.0, "delta_bound": 1.7320508},
        "disturbance": {"type": "constant", "vector": [1.0, 1.0, 1.0]},
        "initial": {"q": [-1.0, 0.0, 0.0, 0.0], "omega": [1.299038105676658, 1.75, -0.5]},
        "sim": {"dt": 0.001, "t_end": 0.5, "record_stride": 10},
    }


def _run(cfg):
    trace, metrics = simulate(cfg)
    return cfg, trace, metrics


@pytest.fixture(scope="session")
def case1_run():
    """Full 40 s case study 1 (constant disturbance, robust law)."""
    return _run(case_study(1))


@pytest.fixture(scope="session")
def case2_run():
    """Full 40 s case study 2 (sinusoidal disturbance, robust law)."""
    return _run(case_study(2))


@pytest.fixture(scope="session")
def case3_run():
    """Full 40 s case study 3 (sinusoidal disturbance, non-robust law)."""
    return _run(case_study(3))


@pytest.fixture(scope="session")
def perturbed_run():
    """Undisturbed non-robust loop from |e_q(0)| = 0.5 inside S(0.1, 1), 20 s."""
    return _run(perturbed_scenario(0.5, t_end=20.0))
