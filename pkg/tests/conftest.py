import pytest

from collapse_lab.entities.constants import PhysicalConstants, RateConvention
from collapse_lab.entities.densities import Resolution


@pytest.fixture
def consts() -> PhysicalConstants:
    return PhysicalConstants()


@pytest.fixture
def unit_consts() -> PhysicalConstants:
    """
    G = hbar = 1 so energies read as pure geometry factors.
    """
    return PhysicalConstants(G=1.0, hbar=1.0)


@pytest.fixture
def half() -> RateConvention:
    return RateConvention(kappa=0.5)


@pytest.fixture
def tiny_res() -> Resolution:
    return Resolution(sigma=1e-20)
