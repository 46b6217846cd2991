import numpy as np
import pytest

from freeprobe.equilibrium import Potential, solve_equilibrium


@pytest.fixture(scope="session")
def gue_potential():
    return Potential.gaussian()


@pytest.fixture(scope="session")
def gue_solution(gue_potential):
    return solve_equilibrium(gue_potential)


@pytest.fixture(scope="session")
def quartic_potential():
    return Potential.quartic(0.1)


@pytest.fixture(scope="session")
def quartic_solution(quartic_potential):
    return solve_equilibrium(quartic_potential)


@pytest.fixture(scope="session")
def asym_potential():
    return Potential.quartic(0.1, cubic=0.3)


@pytest.fixture(scope="session")
def asym_solution(asym_potential):
    return solve_equilibrium(asym_potential)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
