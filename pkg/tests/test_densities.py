import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from collapse_lab.entities.densities import (
    DensityGrid,
    GaussianBlob,
    GranularLattice,
    KernelProfile,
    NucleusProfile,
    Resolution,
    UniformBall,
)
from collapse_lab.exceptions import (
    BoxTooSmallError,
    DegenerateGeometryError,
    OverlappingNucleiError,
    RegridRequiredError,
    ResolutionUndersampledError,
)
from collapse_lab.impl.densities import (
    auto_box,
    ball_profile,
    center_of,
    coarse_grain,
    convolve_grid,
    embed_grid,
    granular_from_lattice,
    mass_density_at,
    next_power_of_two,
    rasterize,
    scale_mass,
    total_mass,
    translate,
)


def test_ball_density():
    ball = UniformBall(mass=4.0 * math.pi / 3.0, radius=1.0)
    assert ball.density == pytest.approx(1.0)
    assert mass_density_at(ball, np.array([[0.5, 0, 0], [1.5, 0, 0]])) == pytest.approx([1.0, 0.0])


def test_lattice_density_sums_nuclei():
    profile = NucleusProfile(kind=NucleusProfile.Kind.BALL, size=0.1)
    lattice = granular_from_lattice(1.0, (2, 1, 1), 1.0, profile)
    rho = 1.0 / (4.0 * math.pi * 0.1**3 / 3.0)
    points = np.array([[-0.5, 0.0, 0.0], [0.55, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert mass_density_at(lattice, points) == pytest.approx([rho, rho, 0.0])
    with pytest.raises(DegenerateGeometryError):
        mass_density_at(granular_from_lattice(1.0, (2, 1, 1), 1.0), points)


def test_smoothed_ball_profile_integrates_to_mass():
    r = np.linspace(0.0, 4.0, 40001)
    rho = ball_profile(r, 1.0, 1.0, smoothing=0.3)
    mass = trapezoid(4.0 * np.pi * r * r * rho, r)
    assert mass == pytest.approx(1.0, rel=1e-6)


def test_smoothed_ball_profile_is_finite_at_center():
    rho = ball_profile(np.array([0.0, 1e-30]), 1.0, 1.0, smoothing=0.5)
    assert np.all(np.isfinite(rho))
    assert rho[0] == pytest.approx(rho[1], rel=1e-12)


@pytest.mark.parametrize(("n", "expected"), [(1, 1), (2, 2), (3, 4), (100, 128), (128, 128)])
def test_next_power_of_two(n, expected):
    assert next_power_of_two(n) == expected


def test_lattice_sites_are_centered():
    lattice = granular_from_lattice(1e-10, (2, 3, 4), 1.0)
    assert len(lattice.sites) == 24
    assert center_of(lattice) == pytest.approx([0.0, 0.0, 0.0], abs=1e-25)
    assert total_mass(lattice) == pytest.approx(24.0)


def test_lattice_rejects_overlapping_nuclei():
    with pytest.raises(OverlappingNucleiError) as info:
        granular_from_lattice(1.0, (2, 2, 2), 1.0, NucleusProfile(size=0.5))
    assert info.value.nucleus_size == 0.5


def test_translate_and_scale():
    blob = GaussianBlob(mass=2.0, width=1.0)
    moved = translate(blob, (1.0, 2.0, 3.0))
    assert moved.center == (1.0, 2.0, 3.0)
    assert scale_mass(moved, 3.0).mass == 6.0
    lattice = translate(granular_from_lattice(1.0, (1, 1, 1), 1.0), (0.5, 0, 0))
    assert lattice.positions()[0] == pytest.approx([0.5, 0.0, 0.0])


def test_rasterize_gaussian_conserves_mass():
    blob = GaussianBlob(mass=3.0, width=1.0)
    origin, edge, dims = auto_box([blob], None, 32)
    grid = rasterize(blob, origin, edge, dims)
    assert total_mass(grid) == pytest.approx(3.0, rel=1e-12)
    assert abs(grid.mass_error) < 1e-12


def test_rasterize_ball_mass_error_is_small():
    ball = UniformBall(mass=1.0, radius=1.0)
    origin, edge, dims = auto_box([ball], None, 32, margin=0.25)
    grid = rasterize(ball, origin, edge, dims)
    assert abs(grid.mass_error) < 0.02


def test_rasterize_rejects_small_box():
    blob = GaussianBlob(mass=1.0, width=1.0)
    with pytest.raises(BoxTooSmallError) as info:
        rasterize(blob, (-1.0, -1.0, -1.0), 0.25, (8, 8, 8))
    assert info.value.captured_fraction < 0.999


def test_rasterize_point_mass_lands_in_one_voxel():
    grid = rasterize(GaussianBlob(mass=1.0, width=0.0, center=(0.1, 0.1, 0.1)), (-1, -1, -1), 0.5, (4, 4, 4))
    assert np.count_nonzero(grid.values) == 1
    assert total_mass(grid) == pytest.approx(1.0)


def test_density_grid_validates_values():
    with pytest.raises(ValueError):
        DensityGrid(origin=(0, 0, 0), voxel_edge=1.0, dims=(2, 2, 2), values=-np.ones((2, 2, 2)))
    with pytest.raises(ValueError):
        DensityGrid(origin=(0, 0, 0), voxel_edge=1.0, dims=(2, 2, 2), values=np.ones((2, 2, 3)))


def test_embed_grid_requires_alignment():
    grid = DensityGrid(origin=(0, 0, 0), voxel_edge=1.0, dims=(2, 2, 2), values=np.ones((2, 2, 2)))
    embedded = embed_grid(grid, (-1.0, -1.0, -1.0), 1.0, (4, 4, 4))
    assert total_mass(embedded) == pytest.approx(8.0)
    assert embedded.values[1, 1, 1] == 1.0
    with pytest.raises(RegridRequiredError):
        embed_grid(grid, (-0.5, 0.0, 0.0), 1.0, (4, 4, 4))
    with pytest.raises(RegridRequiredError):
        embed_grid(grid, (0.0, 0.0, 0.0), 0.5, (8, 8, 8))


def test_gaussian_coarse_graining_stays_analytic():
    res = Resolution(sigma=0.5)
    assert coarse_grain(GaussianBlob(mass=1.0, width=1.2), res).width == pytest.approx(1.3)
    assert coarse_grain(UniformBall(mass=1.0, radius=1.0), res).smoothing == pytest.approx(0.5)
    lattice = coarse_grain(granular_from_lattice(1.0, (2, 1, 1), 1.0), res)
    assert lattice.nucleus_profile.kind == NucleusProfile.Kind.GAUSSIAN
    assert lattice.nucleus_profile.size == pytest.approx(0.5)


def test_ball_smearing_of_point_mass_is_a_ball():
    res = Resolution(sigma=0.5, profile=KernelProfile.UNIFORM_BALL)
    ball = coarse_grain(GaussianBlob(mass=2.0, width=0.0, center=(1.0, 0, 0)), res)
    assert isinstance(ball, UniformBall)
    assert ball.radius == 0.5
    assert ball.center == (1.0, 0, 0)


def test_convolve_grid_conserves_mass_and_pads():
    values = np.zeros((8, 8, 8))
    values[4, 4, 4] = 1.0
    grid = DensityGrid(origin=(0, 0, 0), voxel_edge=0.1, dims=(8, 8, 8), values=values)
    smeared = convolve_grid(grid, Resolution(sigma=0.3))
    assert all(n & (n - 1) == 0 for n in smeared.dims)
    assert total_mass(smeared) == pytest.approx(total_mass(grid), rel=1e-12)


def test_convolve_grid_rejects_coarse_voxels():
    grid = DensityGrid(origin=(0, 0, 0), voxel_edge=1.0, dims=(2, 2, 2), values=np.ones((2, 2, 2)))
    with pytest.raises(ResolutionUndersampledError):
        convolve_grid(grid, Resolution(sigma=1.0))


def test_uniform_ball_smearing_of_a_ball_goes_through_a_grid():
    res = Resolution(sigma=0.5, profile=KernelProfile.UNIFORM_BALL)
    smeared = coarse_grain(UniformBall(mass=1.0, radius=1.0), res)
    assert isinstance(smeared, DensityGrid)
    assert total_mass(smeared) == pytest.approx(1.0 + smeared.mass_error, rel=1e-9)


def test_auto_box_rejects_zero_extent():
    with pytest.raises(DegenerateGeometryError):
        auto_box([GaussianBlob(mass=1.0, width=0.0)], None, 8)


def test_empty_lattice_cannot_be_rasterized():
    with pytest.raises(DegenerateGeometryError):
        rasterize(GranularLattice(sites=(), nucleus_mass=1.0), (0, 0, 0), 1.0, (2, 2, 2))
