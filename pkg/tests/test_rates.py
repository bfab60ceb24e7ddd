import math

import pytest

from collapse_lab.entities.constants import MatterSpec, NuclearDensityReading, PhysicalConstants, RateConvention
from collapse_lab.entities.densities import UniformBall
from collapse_lab.exceptions import DegenerateGeometryError
from collapse_lab.impl.catness import dp_catness_of, rate_from_catness
from collapse_lab.impl.densities import translate
from collapse_lab.impl.rates import (
    amplification,
    com_rate_small_displacement,
    equilibrium_rate,
    equilibrium_state,
    newton_frequency,
    nuclear_density,
    nuclear_frequency,
)


def test_newton_frequency(consts):
    assert newton_frequency(1000.0, consts) == pytest.approx(5.2873e-4, rel=1e-4)
    with pytest.raises(DegenerateGeometryError):
        newton_frequency(0.0, consts)


def test_nuclear_density_readings():
    spec = MatterSpec()
    assert nuclear_density(spec) == pytest.approx(1e15, rel=1e-12)
    literal = nuclear_density(spec, NuclearDensityReading.R_OVER_SIGMA, radius=1e-13)
    assert literal == pytest.approx(1e3 * 1e3, rel=1e-12)
    with pytest.raises(DegenerateGeometryError):
        nuclear_density(spec, NuclearDensityReading.R_OVER_SIGMA)


def test_nuclear_frequency_and_amplification(consts):
    spec = MatterSpec()
    assert 1e2 <= nuclear_frequency(spec, consts) <= 1e4
    assert amplification(spec, consts) == pytest.approx(1e12, rel=1e-10)


def test_com_rate_formula(consts):
    rate = com_rate_small_displacement(1e-3, 528.7, 1e-15, RateConvention(), consts)
    assert rate.value == pytest.approx(1.325e6, rel=1e-3)
    assert rate.kappa == 0.5
    assert rate.regime_valid is None


def test_com_rate_regime_flag(consts):
    conv = RateConvention()
    inside = com_rate_small_displacement(1.0, 1.0, 1e-16, conv, consts, regime_scale=1e-14)
    outside = com_rate_small_displacement(1.0, 1.0, 1e-14, conv, consts, regime_scale=1e-14)
    assert inside.regime_valid is True
    assert outside.regime_valid is False
    assert outside.value > 0


def test_com_rate_rejects_negative_displacement(consts):
    with pytest.raises(DegenerateGeometryError):
        com_rate_small_displacement(1.0, 1.0, -1.0, RateConvention(), consts)


def test_half_kappa_reconciles_catness_and_formula(consts):
    M, R, dx = 1.0, 0.1, 1e-9
    ball = UniformBall(mass=M, radius=R)
    conv = RateConvention(kappa=0.5)
    l2 = dp_catness_of(ball, translate(ball, (dx, 0.0, 0.0)), consts).value
    omega = newton_frequency(ball.density, consts)
    from_catness = rate_from_catness(l2, conv, consts).value
    formula = com_rate_small_displacement(M, omega, dx, conv, consts).value
    assert from_catness == pytest.approx(formula, rel=1e-6)


def test_equilibrium_state_balances(consts):
    omega = newton_frequency(1000.0, consts)
    state = equilibrium_state(1e-3, omega, consts)
    assert state.heuristic is True
    assert state.collapse_rate == pytest.approx(omega, rel=1e-12)
    assert state.spreading_rate == pytest.approx(omega, rel=1e-12)
    assert state.equilibrium_rate == omega
    assert state.width == pytest.approx(math.sqrt(consts.hbar / (1e-3 * omega)))


def test_equilibrium_rate_does_not_depend_on_hbar():
    omega = 1e-3
    heavy = PhysicalConstants(hbar=1.0)
    assert equilibrium_state(1.0, omega, heavy).equilibrium_rate == equilibrium_state(1.0, omega, PhysicalConstants()).equilibrium_rate
    assert 1.0 / equilibrium_rate(newton_frequency(1000.0, PhysicalConstants())) / 3600.0 == pytest.approx(0.525, rel=0.01)
