"""Pytest configuration and shared fixtures."""

from __future__ import annotations

import numpy as np
import pytest
from sympy.polys.rings import PolyRing

from dmflags.config import PROPERTY_CASES, SEED
from dmflags.coeff_ring import Field, make_ring
from dmflags.dm_core import DiffModule, fold
from dmflags.flags import FreeFlag
from dmflags.samples import BeExample, be_example, failure_retract, k_delta, koszul_complex


# =============================================================================
# PYTEST HOOKS
# =============================================================================


def pytest_configure(config: pytest.Config) -> None:
    """Configure pytest markers."""
    config.addinivalue_line("markers", "unit: fast checks of a single operation")
    config.addinivalue_line("markers", "golden: reproductions of the worked examples")
    config.addinivalue_line("markers", "property: seeded randomized suites")
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance scenarios")
    config.addinivalue_line("markers", "slow: mark test as slow")
    config.addinivalue_line("markers", "cli: runs the command-line interface in a subprocess")


# =============================================================================
# RINGS
# =============================================================================


@pytest.fixture(scope="session")
def qq_xy() -> PolyRing:
    return make_ring(Field.rationals(), ["x", "y"])


@pytest.fixture(scope="session")
def qq_x() -> PolyRing:
    return make_ring(Field.rationals(), ["x"])


@pytest.fixture(scope="session")
def gf101_xy() -> PolyRing:
    return make_ring(Field.prime(101), ["x", "y"])


# =============================================================================
# NAMED OBJECTS
# =============================================================================


@pytest.fixture(scope="session")
def be() -> BeExample:
    return be_example()


@pytest.fixture(scope="session")
def kdelta() -> FreeFlag:
    return k_delta()


@pytest.fixture(scope="session")
def failure() -> DiffModule:
    return failure_retract()


@pytest.fixture(scope="session")
def koszul_x(qq_x: PolyRing) -> DiffModule:
    """fold(Koszul(x)) as a ℤ/2-graded module."""
    return fold(koszul_complex(qq_x), 2)


@pytest.fixture(scope="session")
def koszul_xy(qq_xy: PolyRing) -> DiffModule:
    """fold(Koszul(x, y)) as a ℤ/2-graded module."""
    return fold(koszul_complex(qq_xy), 2)


# =============================================================================
# RANDOMNESS
# =============================================================================


@pytest.fixture
def rng(request: pytest.FixtureRequest) -> np.random.Generator:
    """Generator seeded from DMFLAGS_SEED and the test name, so tests stay independent."""
    return np.random.default_rng([SEED, sum(map(ord, request.node.name))])


@pytest.fixture(scope="session")
def property_cases() -> int:
    return PROPERTY_CASES
