import os

import numpy as np
import pytest

from spinbus.hamiltonian import HamiltonianParams
from spinbus.system import build_layout

# ----------------------------------------------------------
#  DEFAULT TIER – fast runs everything except @slow
# ----------------------------------------------------------
DEFAULT_TIER = os.getenv("SPINBUS_TIER", "fast").lower()


def pytest_addoption(parser):
    """Add command-line option for the test tier"""
    parser.addoption(
        "--tier",
        action="store",
        default=DEFAULT_TIER,
        help=f"Test tier: fast, slow (default: {DEFAULT_TIER})"
    )


def pytest_collection_modifyitems(config, items):
    tier = config.getoption("--tier").lower()
    if tier not in {"fast", "slow"}:
        raise pytest.UsageError(f"Unsupported tier: {tier}. Supported tiers: fast, slow")
    if tier == "slow":
        return
    skip_slow = pytest.mark.skip(reason="slow tier only (use --tier slow)")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ---------- fixtures ----------
@pytest.fixture(scope="session")
def small_layout():
    """N=3 chain with one pair: 5 sites, small enough for the dense oracle."""
    return build_layout(3, 1)


@pytest.fixture(scope="session")
def two_pair_layout():
    """N=2 chain with two pairs: 6 sites."""
    return build_layout(2, 2)


@pytest.fixture(scope="session")
def s1_params():
    return HamiltonianParams.s1(0.04, [0.1])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "results"
    path.mkdir()
    return path
