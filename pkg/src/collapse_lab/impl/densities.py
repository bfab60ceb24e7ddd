"""
Mass densities f(r): point evaluation, Gaussian / uniform-ball coarse-graining
and rasterization onto voxel grids.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import erf, ndtr

from ..entities.densities import (
    DensityGrid,
    GaussianBlob,
    GranularLattice,
    KernelProfile,
    MassDensity,
    NucleusProfile,
    Resolution,
    UniformBall,
    Vector3,
)
from ..exceptions import (
    BoxTooSmallError,
    DegenerateGeometryError,
    OverlappingNucleiError,
    RegridRequiredError,
    ResolutionUndersampledError,
)

logger = logging.getLogger(__name__)

MIN_CAPTURED_FRACTION = 0.999
GAUSSIAN_REACH = 8.0  # tails beyond 8 std carry < 1e-14 of the mass
SUBSAMPLES = 4
MAX_AUTO_DIMS = 256


def next_power_of_two(n: int) -> int:
    return 1 << max(0, math.ceil(math.log2(max(n, 1))))


def total_mass(f: MassDensity) -> float:
    match f:
        case UniformBall() | GaussianBlob():
            return f.mass
        case GranularLattice():
            return f.nucleus_mass * len(f.sites)
        case DensityGrid():
            return float(math.fsum(f.values.ravel())) * f.voxel_volume
    raise TypeError(f"unsupported density {type(f).__name__}")


def center_of(f: MassDensity) -> np.ndarray:
    match f:
        case UniformBall() | GaussianBlob():
            return np.asarray(f.center, dtype=float)
        case GranularLattice():
            return f.positions().mean(axis=0) if f.sites else np.asarray(f.com_offset, dtype=float)
        case DensityGrid():
            return np.array([f.origin[i] + 0.5 * f.dims[i] * f.voxel_edge for i in range(3)])
    raise TypeError(f"unsupported density {type(f).__name__}")


def profile_extent(profile: NucleusProfile) -> float:
    if profile.kind == NucleusProfile.Kind.GAUSSIAN:
        return GAUSSIAN_REACH * profile.size
    return profile.size + GAUSSIAN_REACH * profile.smoothing


def extent(f: MassDensity) -> float:
    """
    Radius around center_of(f) outside which f carries no appreciable mass.
    """
    match f:
        case UniformBall():
            return f.radius + GAUSSIAN_REACH * f.smoothing
        case GaussianBlob():
            return GAUSSIAN_REACH * f.width
        case GranularLattice():
            if not f.sites:
                return 0.0
            positions = f.positions()
            spread = np.linalg.norm(positions - positions.mean(axis=0), axis=1).max()
            return float(spread) + profile_extent(f.nucleus_profile)
        case DensityGrid():
            return 0.5 * math.sqrt(sum((n * f.voxel_edge) ** 2 for n in f.dims))
    raise TypeError(f"unsupported density {type(f).__name__}")


def translate(f: MassDensity, shift: Sequence[float]) -> MassDensity:
    """
    Rigidly translate f by shift (m).
    """
    delta = np.asarray(shift, dtype=float)
    match f:
        case UniformBall() | GaussianBlob():
            return f.model_copy(update={"center": tuple(np.asarray(f.center) + delta)})
        case GranularLattice():
            return f.model_copy(update={"com_offset": tuple(np.asarray(f.com_offset) + delta)})
        case DensityGrid():
            return f.model_copy(update={"origin": tuple(np.asarray(f.origin) + delta)})
    raise TypeError(f"unsupported density {type(f).__name__}")


def scale_mass(f: MassDensity, factor: float) -> MassDensity:
    match f:
        case UniformBall() | GaussianBlob():
            return f.model_copy(update={"mass": f.mass * factor})
        case GranularLattice():
            return f.model_copy(update={"nucleus_mass": f.nucleus_mass * factor})
        case DensityGrid():
            return DensityGrid(
                origin=f.origin, voxel_edge=f.voxel_edge, dims=f.dims, values=f.values * factor, mass_error=f.mass_error
            )
    raise TypeError(f"unsupported density {type(f).__name__}")


# --------------------------------------------------------------------------
# radial profiles


def ball_profile(r: np.ndarray, mass: float, radius: float, smoothing: float = 0.0) -> np.ndarray:
    """
    Density of a uniform ball, optionally convolved with an isotropic Gaussian.
    """
    r = np.asarray(r, dtype=float)
    rho = mass / (4.0 * math.pi * radius**3 / 3.0)
    if smoothing == 0.0:
        return np.where(r <= radius, rho, 0.0)

    s = smoothing
    root2s = math.sqrt(2.0) * s
    bulk = 0.5 * (erf((radius - r) / root2s) + erf((radius + r) / root2s))
    small = r < 1e-9 * s
    r_safe = np.where(small, 1.0, r)
    edge = s / (r_safe * math.sqrt(2.0 * math.pi)) * np.exp(-((radius - r) ** 2) / (2 * s * s))
    edge = edge * np.expm1(-2.0 * radius * r_safe / (s * s))
    limit = -2.0 * radius / (s * math.sqrt(2.0 * math.pi)) * math.exp(-(radius**2) / (2 * s * s))
    edge = np.where(small, limit, edge)
    return rho * np.clip(bulk + edge, 0.0, None)


def gaussian_profile(r: np.ndarray, mass: float, width: float) -> np.ndarray:
    if width == 0.0:
        raise DegenerateGeometryError("a point mass has no finite density")
    r = np.asarray(r, dtype=float)
    return mass / (2.0 * math.pi * width * width) ** 1.5 * np.exp(-(r * r) / (2.0 * width * width))


def nucleus_density(r: np.ndarray, mass: float, profile: NucleusProfile) -> np.ndarray:
    if profile.kind == NucleusProfile.Kind.GAUSSIAN:
        return gaussian_profile(r, mass, profile.size)
    if profile.size == 0.0:
        if profile.smoothing == 0.0:
            raise DegenerateGeometryError("a point nucleus has no finite density")
        return gaussian_profile(r, mass, profile.smoothing)
    return ball_profile(r, mass, profile.size, profile.smoothing)


def mass_density_at(f: MassDensity, points: np.ndarray) -> np.ndarray:
    """
    Evaluate f at points of shape (..., 3), kg/m^3.
    """
    points = np.asarray(points, dtype=float)
    match f:
        case UniformBall():
            r = np.linalg.norm(points - np.asarray(f.center), axis=-1)
            return ball_profile(r, f.mass, f.radius, f.smoothing)
        case GaussianBlob():
            r = np.linalg.norm(points - np.asarray(f.center), axis=-1)
            return gaussian_profile(r, f.mass, f.width)
        case GranularLattice():
            out = np.zeros(points.shape[:-1])
            for site in f.positions():
                out += nucleus_density(np.linalg.norm(points - site, axis=-1), f.nucleus_mass, f.nucleus_profile)
            return out
        case DensityGrid():
            idx = np.floor((points - np.asarray(f.origin)) / f.voxel_edge).astype(int)
            inside = np.all((idx >= 0) & (idx < np.asarray(f.dims)), axis=-1)
            clipped = np.clip(idx, 0, np.asarray(f.dims) - 1)
            values = f.values[clipped[..., 0], clipped[..., 1], clipped[..., 2]]
            return np.where(inside, values, 0.0)
    raise TypeError(f"unsupported density {type(f).__name__}")


# --------------------------------------------------------------------------
# lattices


def granular_from_lattice(
    lattice_constant: float,
    dims: Sequence[int],
    nucleus_mass: float,
    profile: NucleusProfile = NucleusProfile(),
) -> GranularLattice:
    """
    Cubic lattice of identical nuclei centered at the origin.
    """
    if lattice_constant <= 0 or nucleus_mass <= 0:
        raise DegenerateGeometryError("lattice constant and nucleus mass must be positive")
    if len(dims) != 3 or any(int(n) < 0 for n in dims):
        raise DegenerateGeometryError(f"invalid lattice dims {tuple(dims)}")
    if lattice_constant <= 2.0 * profile.radius:
        raise OverlappingNucleiError(lattice_constant, profile.radius)

    axes = [(np.arange(int(n)) - (int(n) - 1) / 2.0) * lattice_constant for n in dims]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    sites = tuple(tuple(float(c) for c in row) for row in mesh)
    return GranularLattice(sites=sites, nucleus_mass=nucleus_mass, nucleus_profile=profile)


# --------------------------------------------------------------------------
# rasterization


def _axis_edges(origin: float, edge: float, n: int) -> np.ndarray:
    return origin + np.arange(n + 1) * edge


def _gaussian_cells(center: np.ndarray, width: float, origin: Vector3, edge: float, dims: Sequence[int]) -> np.ndarray:
    """
    Exact fraction of a Gaussian's mass in each voxel (separable erf integrals).
    """
    fractions = []
    for i in range(3):
        edges = _axis_edges(origin[i], edge, dims[i])
        cdf = ndtr((edges - center[i]) / width)
        fractions.append(np.diff(cdf))
    return np.einsum("i,j,k->ijk", *fractions)


def _point_cells(center: np.ndarray, origin: Vector3, edge: float, dims: Sequence[int]) -> np.ndarray:
    cells = np.zeros(tuple(dims))
    idx = np.floor((center - np.asarray(origin)) / edge).astype(int)
    if np.all(idx >= 0) and np.all(idx < np.asarray(dims)):
        cells[tuple(idx)] = 1.0
    return cells


def _supersampled_cells(
    density,
    center: np.ndarray,
    reach: float,
    origin: Vector3,
    edge: float,
    dims: Sequence[int],
    subsamples: int,
) -> np.ndarray:
    """
    Cell masses of a compact radial density by sub-cell midpoint sampling,
    restricted to the voxels within reach of center.
    """
    cells = np.zeros(tuple(dims))
    lo = np.floor((center - reach - np.asarray(origin)) / edge).astype(int)
    hi = np.ceil((center + reach - np.asarray(origin)) / edge).astype(int)
    lo = np.clip(lo, 0, np.asarray(dims))
    hi = np.clip(hi, 0, np.asarray(dims))
    if np.any(hi <= lo):
        return cells

    offsets = (np.arange(subsamples) + 0.5) / subsamples * edge
    sub_y = (origin[1] + np.arange(lo[1], hi[1])[:, None] * edge + offsets[None, :]).ravel()
    sub_z = (origin[2] + np.arange(lo[2], hi[2])[:, None] * edge + offsets[None, :]).ravel()
    ny, nz = hi[1] - lo[1], hi[2] - lo[2]
    weight = edge**3 / subsamples**3

    # one x-slab of voxels at a time keeps the sample arrays small
    for ix in range(lo[0], hi[0]):
        sub_x = origin[0] + ix * edge + offsets
        dx2 = (sub_x - center[0]) ** 2
        dy2 = (sub_y - center[1]) ** 2
        dz2 = (sub_z - center[2]) ** 2
        r = np.sqrt(dx2[:, None, None] + dy2[None, :, None] + dz2[None, None, :])
        values = density(r).reshape(subsamples, ny, subsamples, nz, subsamples)
        cells[ix, lo[1] : hi[1], lo[2] : hi[2]] = values.sum(axis=(0, 2, 4)) * weight
    return cells


def _nucleus_cells(
    site: np.ndarray, mass: float, profile: NucleusProfile, origin: Vector3, edge: float, dims, subsamples: int
) -> np.ndarray:
    """
    Voxel masses of one nucleus.
    """
    if profile.kind == NucleusProfile.Kind.GAUSSIAN or profile.size == 0.0:
        width = profile.size if profile.kind == NucleusProfile.Kind.GAUSSIAN else profile.smoothing
        if width == 0.0:
            return mass * _point_cells(site, origin, edge, dims)
        return mass * _gaussian_cells(site, width, origin, edge, dims)
    reach = profile_extent(profile)
    if reach < 2.0 * edge:
        return mass * _point_cells(site, origin, edge, dims)
    return _supersampled_cells(
        lambda r: nucleus_density(r, mass, profile), site, reach, origin, edge, dims, subsamples
    )


def _captured_fraction(f: MassDensity, cells_mass: float, origin: Vector3, edge: float, dims) -> float:
    """
    Fraction of the mass inside the box. Uses the geometry where it is exact
    so that quadrature error is not mistaken for truncation.
    """
    lo = np.asarray(origin, dtype=float)
    hi = lo + np.asarray(dims) * edge
    match f:
        case GaussianBlob() if f.width > 0:
            c = np.asarray(f.center)
            return float(np.prod(ndtr((hi - c) / f.width) - ndtr((lo - c) / f.width)))
        case UniformBall():
            c = np.asarray(f.center)
            reach = extent(f)
            if np.all(c - reach >= lo) and np.all(c + reach <= hi):
                return 1.0
    return cells_mass / total_mass(f)


def rasterize(
    f: MassDensity,
    origin: Vector3,
    voxel_edge: float,
    dims: Sequence[int],
    subsamples: int = SUBSAMPLES,
) -> DensityGrid:
    """
    Cell-averaged densities of f on the given box; mass_error is the relative
    deviation of the voxel sum from total_mass(f).
    """
    dims = tuple(int(n) for n in dims)
    if voxel_edge <= 0 or any(n <= 0 for n in dims):
        raise DegenerateGeometryError(f"invalid grid geometry: edge {voxel_edge}, dims {dims}")

    match f:
        case UniformBall():
            c = np.asarray(f.center, dtype=float)
            if extent(f) < 2.0 * voxel_edge:
                cells = f.mass * _point_cells(c, origin, voxel_edge, dims)
            else:
                cells = _supersampled_cells(
                    lambda r: ball_profile(r, f.mass, f.radius, f.smoothing),
                    c,
                    extent(f),
                    origin,
                    voxel_edge,
                    dims,
                    subsamples,
                )
        case GaussianBlob():
            c = np.asarray(f.center, dtype=float)
            if f.width == 0.0:
                cells = f.mass * _point_cells(c, origin, voxel_edge, dims)
            else:
                cells = f.mass * _gaussian_cells(c, f.width, origin, voxel_edge, dims)
        case GranularLattice():
            if not f.sites:
                raise DegenerateGeometryError("lattice has no sites")
            cells = np.zeros(dims)
            for site in f.positions():
                cells += _nucleus_cells(site, f.nucleus_mass, f.nucleus_profile, origin, voxel_edge, dims, subsamples)
        case DensityGrid():
            return embed_grid(f, origin, voxel_edge, dims)
        case _:
            raise TypeError(f"unsupported density {type(f).__name__}")

    mass = total_mass(f)
    cells_mass = float(math.fsum(cells.ravel()))
    captured = _captured_fraction(f, cells_mass, origin, voxel_edge, dims)
    if captured < MIN_CAPTURED_FRACTION:
        raise BoxTooSmallError(captured)

    mass_error = cells_mass / mass - 1.0
    logger.debug("rasterized %s on %s grid, relative mass error %.3e", f.kind, dims, mass_error)
    return DensityGrid(
        origin=tuple(float(x) for x in origin),
        voxel_edge=voxel_edge,
        dims=dims,
        values=cells / voxel_edge**3,
        mass_error=mass_error,
    )


def embed_grid(grid: DensityGrid, origin: Vector3, voxel_edge: float, dims: Sequence[int]) -> DensityGrid:
    """
    Place grid into a larger box of the same voxel edge; offsets must be whole voxels.
    """
    if not math.isclose(grid.voxel_edge, voxel_edge, rel_tol=1e-12):
        raise RegridRequiredError(f"voxel edge {grid.voxel_edge:g} m differs from target {voxel_edge:g} m")
    shift = (np.asarray(grid.origin) - np.asarray(origin)) / voxel_edge
    offset = np.rint(shift).astype(int)
    if not np.allclose(shift, offset, atol=1e-6):
        raise RegridRequiredError("grid origins are not aligned to a common voxel lattice")
    dims = tuple(int(n) for n in dims)
    if np.any(offset < 0) or np.any(offset + np.asarray(grid.dims) > np.asarray(dims)):
        raise RegridRequiredError("target box does not contain the grid")
    values = np.zeros(dims)
    ox, oy, oz = offset
    nx, ny, nz = grid.dims
    values[ox : ox + nx, oy : oy + ny, oz : oz + nz] = grid.values
    return DensityGrid(
        origin=tuple(float(x) for x in origin), voxel_edge=voxel_edge, dims=dims, values=values, mass_error=grid.mass_error
    )


def auto_box(fs: Sequence[MassDensity], voxel_edge: float | None, dims: int, margin: float = 0.0):
    """
    Smallest cubic box of dims^3 voxels covering every density in fs
    (plus margin); returns (origin, voxel_edge, dims).
    """
    lows, highs = [], []
    for f in fs:
        if isinstance(f, DensityGrid):
            lows.append(np.asarray(f.origin))
            highs.append(np.asarray(f.origin) + np.asarray(f.dims) * f.voxel_edge)
        else:
            c, r = center_of(f), extent(f) + margin
            lows.append(c - r)
            highs.append(c + r)
    lo, hi = np.min(lows, axis=0), np.max(highs, axis=0)
    mid = 0.5 * (lo + hi)
    side = float(np.max(hi - lo))
    if side <= 0:
        raise DegenerateGeometryError("densities have zero extent")
    edge = voxel_edge if voxel_edge is not None else side / dims
    origin = mid - 0.5 * dims * edge
    return tuple(float(x) for x in origin), edge, (dims, dims, dims)


# --------------------------------------------------------------------------
# coarse-graining


def _gaussian_kernel(sigma: float, edge: float) -> np.ndarray:
    m = max(1, math.ceil(GAUSSIAN_REACH * sigma / edge))
    bounds = (np.arange(-m, m + 2) - 0.5) * edge
    weights = np.diff(ndtr(bounds / sigma))
    weights /= weights.sum()
    return np.einsum("i,j,k->ijk", weights, weights, weights)


def _ball_kernel(sigma: float, edge: float, subsamples: int = SUBSAMPLES) -> np.ndarray:
    m = max(1, math.ceil(sigma / edge))
    n = 2 * m + 1
    offsets = (np.arange(n * subsamples) + 0.5) / subsamples * edge - (m + 0.5) * edge
    r = np.sqrt(offsets[:, None, None] ** 2 + offsets[None, :, None] ** 2 + offsets[None, None, :] ** 2)
    inside = (r <= sigma).astype(float).reshape(n, subsamples, n, subsamples, n, subsamples).sum(axis=(1, 3, 5))
    return inside / inside.sum()


def convolve_grid(grid: DensityGrid, res: Resolution) -> DensityGrid:
    """
    Convolve a grid with the unit-mass kernel of res; the output box grows by
    the kernel reach and is padded to power-of-two dims, so no mass is lost.
    """
    if grid.voxel_edge > res.sigma / 2.0:
        raise ResolutionUndersampledError(grid.voxel_edge, res.sigma)

    if res.profile == KernelProfile.GAUSSIAN:
        kernel = _gaussian_kernel(res.sigma, grid.voxel_edge)
    else:
        kernel = _ball_kernel(res.sigma, grid.voxel_edge)
    m = kernel.shape[0] // 2

    full = fftconvolve(grid.values, kernel, mode="full")
    target = [next_power_of_two(n) for n in full.shape]
    pads = [((t - n) // 2, t - n - (t - n) // 2) for t, n in zip(target, full.shape)]
    values = np.clip(np.pad(full, pads), 0.0, None)
    origin = tuple(grid.origin[i] - (m + pads[i][0]) * grid.voxel_edge for i in range(3))
    return DensityGrid(
        origin=origin, voxel_edge=grid.voxel_edge, dims=tuple(target), values=values, mass_error=grid.mass_error
    )


def _smear_profile(profile: NucleusProfile, sigma: float) -> NucleusProfile:
    """
    Gaussian smearing of a nucleus profile in closed form.
    """
    if profile.kind == NucleusProfile.Kind.GAUSSIAN:
        return profile.model_copy(update={"size": math.hypot(profile.size, sigma)})
    if profile.size == 0.0:
        return NucleusProfile(kind=NucleusProfile.Kind.GAUSSIAN, size=math.hypot(profile.smoothing, sigma))
    return profile.model_copy(update={"smoothing": math.hypot(profile.smoothing, sigma)})


def coarse_grain(
    f: MassDensity,
    res: Resolution,
    voxel_edge: float | None = None,
    max_dims: int = MAX_AUTO_DIMS,
) -> MassDensity:
    """
    Convolve f with the unit-mass kernel of res.

    Gaussian smearing of analytic shapes and uniform-ball smearing of point
    masses stay analytic; everything else goes through a grid.
    """
    if isinstance(f, DensityGrid):
        return convolve_grid(f, res)

    if res.profile == KernelProfile.GAUSSIAN:
        match f:
            case UniformBall():
                return f.model_copy(update={"smoothing": math.hypot(f.smoothing, res.sigma)})
            case GaussianBlob():
                return f.model_copy(update={"width": math.hypot(f.width, res.sigma)})
            case GranularLattice():
                return f.model_copy(update={"nucleus_profile": _smear_profile(f.nucleus_profile, res.sigma)})
    else:
        match f:
            case GaussianBlob() if f.width == 0.0:
                return UniformBall(mass=f.mass, radius=res.sigma, center=f.center)
            case GranularLattice() if f.nucleus_profile.is_point:
                return f.model_copy(update={"nucleus_profile": NucleusProfile(kind=NucleusProfile.Kind.BALL, size=res.sigma)})

    # no closed form: rasterize on an automatic box, then convolve
    _, side, _ = auto_box([f], None, 1)
    target_edge = voxel_edge if voxel_edge is not None else res.sigma / 2.0
    n = min(next_power_of_two(math.ceil(side / target_edge)), max_dims)
    edge = side / n
    if edge > res.sigma / 2.0:
        raise ResolutionUndersampledError(edge, res.sigma)
    origin, edge, dims = auto_box([f], edge, n)
    logger.info("coarse-graining %s through a %d^3 grid (edge %.3e m)", f.kind, n, edge)
    return convolve_grid(rasterize(f, origin, edge, dims), res)
