import math

import pytest

from collapse_lab.entities.constants import CSLParams, PhysicalConstants, RateConvention
from collapse_lab.entities.densities import GaussianBlob, KernelProfile, Resolution, UniformBall
from collapse_lab.entities.results import CatnessValue, CollapseModel, EnergyMethod
from collapse_lab.exceptions import DegenerateGeometryError
from collapse_lab.impl.catness import (
    catness_CSL,
    catness_G,
    csl_overlap_integral,
    dp_catness_of,
    lifetime,
    rate_from_catness,
)
from collapse_lab.impl.densities import auto_box, granular_from_lattice, rasterize, scale_mass, translate
from collapse_lab.impl.newton import ball_ball_energy_gap, radial_gaussian_average


def _blob_integral(m: float, S2: float, d: float) -> float:
    return 2.0 * m * m * (2.0 * math.pi * S2) ** -1.5 * -math.expm1(-d * d / (2.0 * S2))


def test_identical_configurations_have_zero_catness(unit_consts):
    ball = UniformBall(mass=1.0, radius=1.0)
    l2 = catness_G(ball, ball, Resolution(sigma=0.1), unit_consts)
    assert l2.value == 0.0
    assert lifetime(l2, RateConvention(), unit_consts) == math.inf


def test_sharp_ball_catness_is_twice_the_energy_gap(unit_consts):
    ball = UniformBall(mass=1.0, radius=1.0)
    for dx in (1e-6, 0.3, 1.5, 4.0):
        result = dp_catness_of(ball, translate(ball, (dx, 0.0, 0.0)), unit_consts)
        assert result.method == EnergyMethod.CLOSED_FORM
        assert result.value == pytest.approx(2.0 * ball_ball_energy_gap(1.0, 1.0, dx, unit_consts), rel=1e-9)


def test_small_displacement_law(consts):
    M, R, dx = 1e-3, 1e-3, 1e-12
    ball = UniformBall(mass=M, radius=R)
    result = dp_catness_of(ball, translate(ball, (dx, 0.0, 0.0)), consts)
    assert result.value == pytest.approx(consts.G * M * M * dx * dx / R**3, rel=1e-6)


def test_smoothed_ball_catness_close_to_sharp(unit_consts):
    ball = UniformBall(mass=1.0, radius=1.0)
    l2 = catness_G(ball, translate(ball, (0.1, 0.0, 0.0)), Resolution(sigma=1e-6), unit_consts)
    assert l2.model == CollapseModel.DP
    assert l2.method == EnergyMethod.CLOSED_FORM
    assert l2.value == pytest.approx(2.0 * ball_ball_energy_gap(1.0, 1.0, 0.1, unit_consts), rel=1e-8)


def test_dp_catness_is_symmetric_and_translation_invariant(unit_consts):
    res = Resolution(sigma=0.2)
    f = UniformBall(mass=1.0, radius=1.0)
    g = translate(f, (0.5, 0.2, 0.0))
    forward = catness_G(f, g, res, unit_consts).value
    backward = catness_G(g, f, res, unit_consts).value
    shifted = catness_G(translate(f, (3.0, -1.0, 2.0)), translate(g, (3.0, -1.0, 2.0)), res, unit_consts).value
    assert forward == pytest.approx(backward, rel=1e-10)
    assert forward == pytest.approx(shifted, rel=1e-8)


def test_dp_catness_scales_with_mass_squared(unit_consts):
    f = GaussianBlob(mass=1.0, width=1.0)
    g = translate(f, (0.7, 0.0, 0.0))
    res = Resolution(sigma=0.3)
    base = catness_G(f, g, res, unit_consts).value
    heavy = catness_G(scale_mass(f, 2.0), scale_mass(g, 2.0), res, unit_consts).value
    assert heavy == pytest.approx(4.0 * base, rel=1e-12)


def test_far_apart_blobs_reach_the_self_energy_plateau(unit_consts):
    f = GaussianBlob(mass=1.0, width=1.0)
    d = 1e4
    l2 = catness_G(f, translate(f, (d, 0.0, 0.0)), Resolution(sigma=1.0), unit_consts)
    s = math.sqrt(2.0) * math.sqrt(2.0)
    plateau = 2.0 * math.sqrt(2.0 / math.pi) / s
    assert l2.value + 2.0 / d == pytest.approx(plateau, rel=1e-10)


def test_lattice_catness_uses_closed_forms(unit_consts):
    lattice = granular_from_lattice(1.0, (2, 2, 2), 1.0)
    res = Resolution(sigma=0.1, profile=KernelProfile.UNIFORM_BALL)
    l2 = catness_G(lattice, translate(lattice, (0.05, 0.0, 0.0)), res, unit_consts)
    assert l2.method == EnergyMethod.CLOSED_FORM
    assert l2.value > 0


def test_uniform_ball_smearing_of_a_ball_uses_the_grid(unit_consts):
    ball = UniformBall(mass=1.0, radius=1.0)
    res = Resolution(sigma=0.5, profile=KernelProfile.UNIFORM_BALL)
    l2 = catness_G(ball, translate(ball, (1.0, 0.0, 0.0)), res, unit_consts)
    assert l2.method == EnergyMethod.GRID_FFT
    assert l2.value > 0
    assert l2.error_estimate >= 0


def test_csl_gaussian_blob_closed_form():
    sigma, w, d = 1.0, 0.5, 0.8
    f = GaussianBlob(mass=2.0, width=w)
    value, method = csl_overlap_integral(f, translate(f, (0.0, d, 0.0)), sigma)
    assert method == EnergyMethod.CLOSED_FORM
    assert value == pytest.approx(_blob_integral(2.0, 2 * w * w + 2 * sigma * sigma, d), rel=1e-12)


def test_csl_blobs_of_different_width():
    sigma = 1.0
    f, g = GaussianBlob(mass=1.0, width=0.5), GaussianBlob(mass=1.0, width=1.5)

    def overlap(wa, wb):
        S2 = wa * wa + wb * wb + 2 * sigma * sigma
        return (2 * math.pi * S2) ** -1.5

    expected = overlap(0.5, 0.5) + overlap(1.5, 1.5) - 2 * overlap(0.5, 1.5)
    value, _ = csl_overlap_integral(f, g, sigma)
    assert value == pytest.approx(expected, rel=1e-12)


def test_csl_small_ball_is_point_like():
    sigma, R, d = 1.0, 1e-3, 1.2
    ball = UniformBall(mass=1.0, radius=R)
    value, method = csl_overlap_integral(ball, translate(ball, (d, 0.0, 0.0)), sigma)
    assert method == EnergyMethod.CLOSED_FORM
    assert value == pytest.approx(_blob_integral(1.0, 2 * sigma * sigma, d), rel=1e-4)


def test_csl_large_ball_tiny_displacement():
    sigma, M, R, d = 1e-7, 1e-3, 5e-3, 1e-14
    ball = UniformBall(mass=M, radius=R)
    value, method = csl_overlap_integral(ball, translate(ball, (d, 0.0, 0.0)), sigma)
    rho = M / (4.0 / 3.0 * math.pi * R**3)
    t = math.sqrt(2.0) * sigma
    expected = 2.0 * rho * rho * math.pi * R * R * d * d / 3.0 * math.sqrt(2.0 / math.pi) / t
    assert method == EnergyMethod.CLOSED_FORM
    assert value == pytest.approx(expected, rel=1e-6)


def test_csl_ball_overlap_moments_match_quadrature():
    sigma, R = 0.01, 1.0
    t = math.sqrt(2.0) * sigma
    rho = 1.0 / (4.0 / 3.0 * math.pi * R**3)
    ball = UniformBall(mass=1.0, radius=R)

    def volume(x):
        x = float(x)
        return math.pi * (4.0 * R + x) * max(2.0 * R - x, 0.0) ** 2 / 12.0

    for d in (0.004, 0.3, 1.5):
        value, _ = csl_overlap_integral(ball, translate(ball, (d, 0.0, 0.0)), sigma)
        gap = radial_gaussian_average(volume, 0.0, t, [2.0 * R]) - radial_gaussian_average(volume, d, t, [2.0 * R])
        assert value == pytest.approx(2.0 * rho * rho * gap, rel=1e-8)


def test_csl_grid_path_matches_closed_form():
    sigma, w, d = 1.0, 2.0, 2.0
    blob = GaussianBlob(mass=1.0, width=w)
    origin, edge, dims = auto_box([blob], 0.5, 32, margin=-8.0)
    grid = rasterize(blob, origin, edge, dims)
    value, method = csl_overlap_integral(grid, translate(grid, (d, 0.0, 0.0)), sigma)
    assert method == EnergyMethod.GRID_FFT
    assert value == pytest.approx(_blob_integral(1.0, 2 * w * w + 2 * sigma * sigma, d), rel=5e-2)


def test_catness_csl_prefactor(consts):
    p = CSLParams(lambda_=1e-16, sigma=1e-7)
    f = GaussianBlob(mass=1e-20, width=0.0)
    l2 = catness_CSL(f, translate(f, (1e-3, 0.0, 0.0)), p, consts)
    integral = 2.0 * 1e-40 * (4.0 * math.pi * p.sigma**2) ** -1.5
    expected = consts.hbar * p.lambda_ * p.sigma**3 / p.m0**2 * integral
    assert l2.model == CollapseModel.CSL
    assert l2.resolution.sigma == p.sigma
    assert l2.value == pytest.approx(expected, rel=1e-12)


def test_lifetime_and_rate(unit_consts):
    l2 = CatnessValue(value=4.0, model=CollapseModel.DP, resolution=Resolution(sigma=1.0))
    assert lifetime(l2, RateConvention(kappa=1.0), unit_consts) == pytest.approx(0.25)
    assert lifetime(l2, RateConvention(kappa=0.5), unit_consts) == pytest.approx(0.5)
    rate = rate_from_catness(l2, RateConvention(kappa=0.5), unit_consts)
    assert rate.value == pytest.approx(2.0)
    assert rate.lifetime == pytest.approx(0.5)
    assert rate_from_catness(0.0, RateConvention(), unit_consts).lifetime == math.inf


def test_rate_rejects_negative_catness(unit_consts):
    with pytest.raises(DegenerateGeometryError):
        rate_from_catness(-1.0, RateConvention(), unit_consts)


def test_lifetime_scales_with_hbar():
    l2 = CatnessValue(value=1e-30, model=CollapseModel.DP, resolution=Resolution(sigma=1.0))
    a = lifetime(l2, RateConvention(kappa=1.0), PhysicalConstants())
    b = lifetime(l2, RateConvention(kappa=1.0), PhysicalConstants(hbar=2 * PhysicalConstants().hbar))
    assert b == pytest.approx(2.0 * a, rel=1e-15)


@pytest.mark.parametrize("kappa", [0.25, 2.0])
def test_rate_convention_rejects_other_kappas(kappa):
    with pytest.raises(ValueError):
        RateConvention(kappa=kappa)


def test_identical_configurations_give_unsigned_zero(consts):
    ball = UniformBall(mass=1e-3, radius=5e-3)
    csl = catness_CSL(ball, ball, CSLParams(lambda_=1e-17, sigma=1e-7), consts)
    dp = catness_G(ball, ball, Resolution(sigma=1e-7), consts)
    for l2 in (csl, dp):
        assert math.copysign(1.0, l2.value) == 1.0
        assert math.copysign(1.0, rate_from_catness(l2, RateConvention(), consts).value) == 1.0
