"""
Newtonian interaction energy

    U(f, g) = -G \\int\\int f(r) g(s) / |r - s| dr ds

by closed forms, by a zero-padded FFT convolution on a grid, and by an
independent quadrature oracle.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.fft
from numpy.polynomial.legendre import leggauss
from scipy.integrate import IntegrationWarning, quad
from scipy.special import erf, erfc

from ..entities.constants import PhysicalConstants
from ..entities.densities import DensityGrid, GaussianBlob, GranularLattice, MassDensity, NucleusProfile, UniformBall
from ..entities.results import EnergyMethod, EnergyResult, QuadratureSpec
from ..exceptions import (
    ConfigurationMismatchError,
    DegenerateGeometryError,
    GridSizeError,
    NumericalFailureError,
    RegridRequiredError,
)
from . import sampling
from .densities import (
    auto_box,
    ball_profile,
    center_of,
    embed_grid,
    extent,
    gaussian_profile,
    next_power_of_two,
    rasterize,
)

logger = logging.getLogger(__name__)

# mean of 1/|r| over the unit cube centered at the origin
SINGULAR_CELL = 2.0 * (-math.pi / 4.0 + 1.5 * math.log(2.0 + math.sqrt(3.0)))

DEFAULT_GRID_DIMS = 128
DEFAULT_MAX_BYTES = 2**31
SMOOTHING_REACH = 10.0
SPECTRAL_THRESHOLD = 0.5


# --------------------------------------------------------------------------
# closed forms


def _ball_ball_shape(u: np.ndarray) -> np.ndarray:
    """
    -U R / (G M^2) for two equal uniform balls at separation u = d / R.
    """
    u = np.asarray(u, dtype=float)
    u_safe = np.where(u > 0, u, 1.0)
    inner = 6.0 / 5.0 - u**2 / 2.0 + 3.0 * u**3 / 16.0 - u**5 / 160.0
    return np.where(u >= 2.0, 1.0 / u_safe, inner)


def ball_ball_energy(M: float, R: float, d: float, consts: PhysicalConstants) -> float:
    """
    Interaction energy of two uniform balls of mass M and radius R whose
    centers are d apart. Point-mass law for d >= 2R, overlap polynomial below.
    """
    if M <= 0 or R <= 0 or d < 0:
        raise DegenerateGeometryError("ball energy needs M, R > 0 and d >= 0")
    return float(-consts.G * M * M / R * _ball_ball_shape(d / R))


def ball_ball_energy_gap(M: float, R: float, d: float, consts: PhysicalConstants) -> float:
    """
    U(d) - U(0) for two equal uniform balls, without cancellation at small d.
    """
    u = d / R
    scale = consts.G * M * M / R
    if u >= 2.0:
        return -consts.G * M * M / d + 6.0 / 5.0 * scale
    return scale * (u**2 / 2.0 - 3.0 * u**3 / 16.0 + u**5 / 160.0)


def gaussian_gaussian_energy(m1: float, m2: float, w1: float, w2: float, d: float, consts: PhysicalConstants) -> float:
    """
    -G m1 m2 erf(d / (2 w_eff)) / d with w_eff^2 = (w1^2 + w2^2) / 2; at d = 0
    the limit -G m1 m2 sqrt(2 / pi) / sqrt(w1^2 + w2^2).
    """
    s = math.hypot(w1, w2)
    return float(-consts.G * m1 * m2 * _erf_kernel(np.asarray(d, dtype=float), s))


def _erf_kernel(d: np.ndarray, s: float) -> np.ndarray:
    """
    erf(d / (sqrt(2) s)) / d, finite at d = 0; 1/d for s = 0.
    """
    d = np.asarray(d, dtype=float)
    if s == 0.0:
        if np.any(d == 0):
            raise DegenerateGeometryError("coincident point masses have infinite energy")
        return 1.0 / d
    d_safe = np.where(d > 0, d, 1.0)
    return np.where(d > 0, erf(d / (math.sqrt(2.0) * s)) / d_safe, math.sqrt(2.0 / math.pi) / s)


def _erf_ratio_gap(a: np.ndarray, b: np.ndarray, diff: np.ndarray, terms: int = 48) -> np.ndarray:
    """
    erf(u1)/u1 - erf(u0)/u0 from a = u1^2, b = u0^2 and diff = a - b, summed
    as a power series in u^2. Accurate for u up to about 2.
    """
    total = np.zeros_like(a)
    geometric = np.ones_like(a)  # sum_{j<n} a^j b^(n-1-j)
    b_power = np.ones_like(a)
    factorial = 1.0
    for n in range(1, terms + 1):
        factorial *= n
        total += (-1.0) ** n * geometric / (factorial * (2 * n + 1))
        b_power = b_power * b
        geometric = a * geometric + b_power
    return 2.0 / math.sqrt(math.pi) * diff * total


@dataclass(frozen=True)
class Atom:
    """
    Spherically symmetric mass element. kind is "ball" or "gaussian"; a
    Gaussian of width 0 is a point mass.
    """

    kind: str
    mass: float
    radius: float = 0.0
    width: float = 0.0

    @property
    def is_point(self) -> bool:
        return self.kind == "gaussian" and self.width == 0.0

    @property
    def support(self) -> float:
        if self.kind == "ball":
            return self.radius + SMOOTHING_REACH * self.width
        return SMOOTHING_REACH * self.width

    def density(self, r: np.ndarray) -> np.ndarray:
        if self.kind == "ball":
            return ball_profile(r, self.mass, self.radius, self.width)
        return gaussian_profile(r, self.mass, self.width)

    def breaks(self) -> list[float]:
        if self.kind == "ball":
            if self.width == 0.0:
                return [self.radius]
            return [max(0.0, self.radius - 6 * self.width), self.radius, self.radius + 6 * self.width]
        return [self.width, 3 * self.width]


def profile_atom(profile: NucleusProfile, mass: float) -> Atom:
    if profile.kind == NucleusProfile.Kind.GAUSSIAN:
        return Atom("gaussian", mass, width=profile.size)
    if profile.size == 0.0:
        return Atom("gaussian", mass, width=profile.smoothing)
    return Atom("ball", mass, radius=profile.size, width=profile.smoothing)


def atoms_of(f: MassDensity) -> tuple[Atom, np.ndarray] | None:
    """
    Split an analytic density into identical atoms and their positions.
    """
    match f:
        case UniformBall():
            return Atom("ball", f.mass, radius=f.radius, width=f.smoothing), np.asarray([f.center], dtype=float)
        case GaussianBlob():
            return Atom("gaussian", f.mass, width=f.width), np.asarray([f.center], dtype=float)
        case GranularLattice():
            if not f.sites:
                raise DegenerateGeometryError("lattice has no sites")
            return profile_atom(f.nucleus_profile, f.nucleus_mass), f.positions()
    return None


def has_closed_form(a: Atom, b: Atom) -> bool:
    if a.kind == "gaussian" and b.kind == "gaussian":
        return True
    if a.kind == "ball" and b.kind == "ball":
        return math.isclose(a.radius, b.radius, rel_tol=1e-12)
    ball, other = (a, b) if a.kind == "ball" else (b, a)
    return ball.width == 0.0 and other.is_point


def _ball_point_shape(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    u_safe = np.where(u > 0, u, 1.0)
    return np.where(u >= 1.0, 1.0 / u_safe, (3.0 - u * u) / 2.0)


def _sinc(x: np.ndarray) -> np.ndarray:
    return np.sinc(np.asarray(x) / math.pi)


def _ball_form_factor(x: np.ndarray) -> np.ndarray:
    """
    Fourier transform of a unit-mass uniform ball at kR = x.
    """
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    x_safe = np.where(small, 1.0, x)
    full = 3.0 * (np.sin(x_safe) - x_safe * np.cos(x_safe)) / x_safe**3
    return np.where(small, 1.0 - x * x / 10.0, full)


def _chi_moment(n: int, s: float) -> float:
    """
    E|y|^n for y ~ N(0, s^2 I) in three dimensions.
    """
    return s**n * 2.0 ** (n / 2.0) * math.gamma((3.0 + n) / 2.0) / math.gamma(1.5)


def offset_moment(n: int, d: float, s: float) -> float:
    """
    E|d e + y|^n for odd n and y ~ N(0, s^2 I).

    Equals E[sign(X) X^(n+1)] / d with X ~ N(d, s^2), expanded in truncated
    normal moments. Small d / s uses the Laplacian series instead.
    """
    if d < 1e-3 * s:
        return _chi_moment(n, s) + d * d / 6.0 * n * (n + 1) * _chi_moment(n - 2, s)
    k = n + 1
    a = -d / s
    pdf = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
    upper = [0.5 * erfc(a / math.sqrt(2.0)), pdf]  # int_a^inf t^j phi(t) dt
    for j in range(2, k + 1):
        upper.append(a ** (j - 1) * pdf + (j - 1) * upper[j - 2])
    positive = 0.0
    whole = 0.0
    for j in range(k + 1):
        term = math.comb(k, j) * d ** (k - j) * s**j
        positive += term * upper[j]
        if j % 2 == 0:
            whole += term * math.prod(range(j - 1, 0, -2))
    return (2.0 * positive - whole) / d


def offset_moment_gap(n: int, d0: float, d1: float, s: float) -> float:
    if max(d0, d1) < 1e-3 * s:
        return (d1 - d0) * (d1 + d0) / 6.0 * n * (n + 1) * _chi_moment(n - 2, s)
    return offset_moment(n, d1, s) - offset_moment(n, d0, s)


def inside_overlap(R: float, s: float, *ds: float) -> bool:
    return max(ds) + SMOOTHING_REACH * s < 2.0 * R


def _smoothed_ball_polynomial(R: float, s: float, d: float) -> float:
    """
    Smoothed overlap polynomial; valid while the blur never reaches 2R.
    """
    u, t = d / R, s / R
    third, fifth = offset_moment(3, u, t), offset_moment(5, u, t)
    return 6.0 / 5.0 - (u * u + 3.0 * t * t) / 2.0 + 3.0 / 16.0 * third - fifth / 160.0


def _quad(integrand, lo: float, hi: float, points: Sequence[float] = (), epsrel: float = 1e-12) -> float:
    """
    Adaptive quadrature; IntegrationWarnings go to the log instead of stderr.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, abserr = quad(integrand, lo, hi, points=list(points) or None, limit=400, epsabs=0.0, epsrel=epsrel)
    for w in caught:
        if issubclass(w.category, IntegrationWarning):
            logger.debug("quad on [%.3e, %.3e] reached %.2e abs error: %s", lo, hi, abserr, str(w.message).strip())
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return value


def _smoothed_ball_shape(R: float, s: float, d: float) -> float:
    """
    -U R / (G M^2) for two equal balls blurred by a Gaussian of pair variance s^2.
    """
    if inside_overlap(R, s, d):
        return _smoothed_ball_polynomial(R, s, d)
    if s >= SPECTRAL_THRESHOLD * R:
        kmax = 12.0 / s

        def integrand(k: float) -> float:
            return float(_ball_form_factor(k * R) ** 2 * math.exp(-0.5 * (s * k) ** 2) * _sinc(k * d))

        value = _quad(integrand, 0.0, kmax, epsrel=1e-12)
        return 2.0 * R / math.pi * value
    return radial_gaussian_average(lambda r: _ball_ball_shape(r / R), d, s, [2.0 * R])


def _smoothed_ball_gap_shape(R: float, s: float, d0: float, d1: float) -> float:
    """
    Shape difference between separations d1 and d0 for blurred equal balls.
    """
    if inside_overlap(R, s, d0, d1):
        u0, u1, t = d0 / R, d1 / R, s / R
        return (
            -(u1 - u0) * (u1 + u0) / 2.0
            + 3.0 / 16.0 * offset_moment_gap(3, u0, u1, t)
            - offset_moment_gap(5, u0, u1, t) / 160.0
        )
    if s >= SPECTRAL_THRESHOLD * R:
        kmax = 12.0 / s

        def integrand(k: float) -> float:
            return float(
                _ball_form_factor(k * R) ** 2 * math.exp(-0.5 * (s * k) ** 2) * _sinc_difference(k * d0, k * d1)
            )

        value = _quad(integrand, 0.0, kmax, epsrel=1e-12)
        return 2.0 * R / math.pi * value
    return _smoothed_ball_shape(R, s, d1) - _smoothed_ball_shape(R, s, d0)


def _sinc_difference(x0: float, x1: float) -> float:
    """
    sinc(x1) - sinc(x0), series for small arguments.
    """
    if max(abs(x0), abs(x1)) < 1e-2:
        a, b = x1 * x1, x0 * x0
        return -(a - b) / 6.0 + (a * a - b * b) / 120.0 - (a**3 - b**3) / 5040.0
    return float(_sinc(x1) - _sinc(x0))


def radial_gaussian_average(h, d: float, s: float, breaks: Sequence[float]) -> float:
    """
    Mean of the radial function h(|d e + y|) over y ~ N(0, s^2 I).
    """
    reach = SMOOTHING_REACH * s
    if d == 0.0:
        norm = math.sqrt(2.0 / math.pi) / s**3

        def integrand0(r: float) -> float:
            return float(r * r * h(np.asarray(r)) * math.exp(-r * r / (2 * s * s)))

        points = [b for b in breaks if 0 < b < reach]
        value = _quad(integrand0, 0.0, reach, points, epsrel=1e-13)
        return norm * value

    lo, hi = max(0.0, d - reach), d + reach
    norm = 1.0 / (d * s * math.sqrt(2.0 * math.pi))

    def integrand(r: float) -> float:
        bracket = -math.exp(-((r - d) ** 2) / (2 * s * s)) * math.expm1(-2.0 * r * d / (s * s))
        return float(r * h(np.asarray(r)) * bracket)

    points = [b for b in breaks if lo < b < hi]
    value = _quad(integrand, lo, hi, points, epsrel=1e-13)
    return norm * value


def pair_energy(a: Atom, b: Atom, d: np.ndarray, consts: PhysicalConstants) -> np.ndarray:
    """
    Closed-form interaction energy of two atoms at center distances d.
    """
    d = np.asarray(d, dtype=float)
    G = consts.G
    if a.kind == "gaussian" and b.kind == "gaussian":
        return -G * a.mass * b.mass * _erf_kernel(d, math.hypot(a.width, b.width))
    if a.kind == "ball" and b.kind == "ball":
        R = a.radius
        s = math.hypot(a.width, b.width)
        if s == 0.0:
            return -G * a.mass * b.mass / R * _ball_ball_shape(d / R)
        shape = np.array([_smoothed_ball_shape(R, s, float(x)) for x in d.ravel()]).reshape(d.shape)
        return -G * a.mass * b.mass / R * shape
    ball, point = (a, b) if a.kind == "ball" else (b, a)
    if ball.width == 0.0 and point.is_point:
        return -G * a.mass * b.mass / ball.radius * _ball_point_shape(d / ball.radius)
    raise ConfigurationMismatchError(f"no closed form for {a.kind}/{b.kind} pair")


def _far_gap(d0: np.ndarray, d1: np.ndarray, r: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """
    1/d1 - 1/d0 with d0 = |r|, d1 = |r + delta|, cancellation-free.
    """
    num = -(2.0 * np.einsum("...i,...i->...", r, delta) + np.einsum("...i,...i->...", delta, delta))
    return num / (d0 * d1 * (d0 + d1))


def pair_energy_gap(
    a: Atom, b: Atom, r: np.ndarray, delta: np.ndarray, consts: PhysicalConstants
) -> np.ndarray:
    """
    U(|r + delta|) - U(|r|) for an atom pair, accurate when delta << |r| or
    when r = 0 and delta is small against the atom size.
    """
    r = np.atleast_2d(np.asarray(r, dtype=float))
    delta = np.broadcast_to(np.asarray(delta, dtype=float), r.shape)
    d0 = np.linalg.norm(r, axis=-1)
    d1 = np.linalg.norm(r + delta, axis=-1)
    G = consts.G
    scale = G * a.mass * b.mass

    if a.kind == "gaussian" and b.kind == "gaussian":
        s = math.hypot(a.width, b.width)
        if s == 0.0:
            return -scale * _far_gap(d0, d1, r, delta)
        k = 1.0 / (math.sqrt(2.0) * s)
        u0, u1 = k * d0, k * d1
        sq = k * k * (2.0 * np.einsum("...i,...i->...", r, delta) + np.einsum("...i,...i->...", delta, delta))
        near = k * _erf_ratio_gap(np.minimum(u1 * u1, 4.0), np.minimum(u0 * u0, 4.0), sq)
        both_out = (u0 > 0) & (u1 > 0)
        x0, x1 = np.where(both_out, d0, 1.0), np.where(both_out, d1, 1.0)
        split = _far_gap(x0, x1, r, delta) - (erfc(k * x1) / x1 - erfc(k * x0) / x0)
        direct = _erf_kernel(d1, s) - _erf_kernel(d0, s)
        out = np.where(np.maximum(u0, u1) < 2.0, near, np.where(both_out, split, direct))
        return -scale * out

    if a.kind == "ball" and b.kind == "ball":
        R = a.radius
        s = math.hypot(a.width, b.width)
        if s > 0.0:
            shape = np.array(
                [_smoothed_ball_gap_shape(R, s, float(x0), float(x1)) for x0, x1 in zip(d0, d1)]
            )
            return -scale / R * shape
        u0, u1 = d0 / R, d1 / R
        both_far = (u0 >= 2.0) & (u1 >= 2.0)
        both_near = (u0 < 2.0) & (u1 < 2.0)
        sq = (2.0 * np.einsum("...i,...i->...", r, delta) + np.einsum("...i,...i->...", delta, delta)) / R**2
        total = u0 + u1
        du = np.where(total > 0, sq / np.where(total > 0, total, 1.0), 0.0)
        near = (
            -sq / 2.0
            + 3.0 / 16.0 * du * (u1 * u1 + u1 * u0 + u0 * u0)
            - du * (u1**4 + u1**3 * u0 + u1**2 * u0**2 + u1 * u0**3 + u0**4) / 160.0
        )
        far = R * _far_gap(np.where(both_far, d0, 1.0), np.where(both_far, d1, 1.0), r, delta)
        mixed = _ball_ball_shape(u1) - _ball_ball_shape(u0)
        shape = np.where(both_far, far, np.where(both_near, near, mixed))
        return -scale / R * shape

    return pair_energy(a, b, d1, consts) - pair_energy(a, b, d0, consts)


def _closed_form_energy(f: MassDensity, g: MassDensity, consts: PhysicalConstants) -> EnergyResult | None:
    fa, ga = atoms_of(f), atoms_of(g)
    if fa is None or ga is None:
        return None
    (atom_f, pos_f), (atom_g, pos_g) = fa, ga
    if not has_closed_form(atom_f, atom_g):
        return None
    separations = np.linalg.norm(pos_f[:, None, :] - pos_g[None, :, :], axis=-1)
    energies = pair_energy(atom_f, atom_g, separations, consts)
    return EnergyResult(value=float(math.fsum(energies.ravel())), method=EnergyMethod.CLOSED_FORM)


# --------------------------------------------------------------------------
# grid path


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _kernel_spectrum(dims: Sequence[int], edge: float) -> np.ndarray:
    """
    rFFT of the 1/r kernel on the doubled (zero-padded) box, singular cell
    replaced by the mean of 1/r over the cube.
    """
    axes = []
    for n in dims:
        i = np.arange(2 * n)
        axes.append(np.minimum(i, 2 * n - i).astype(float))
    dist = np.sqrt(axes[0][:, None, None] ** 2 + axes[1][None, :, None] ** 2 + axes[2][None, None, :] ** 2)
    dist[0, 0, 0] = 1.0
    kernel = 1.0 / (dist * edge)
    kernel[0, 0, 0] = SINGULAR_CELL / edge
    return scipy.fft.rfftn(kernel)


def _fft_energy(f: np.ndarray, g: np.ndarray, edge: float, G: float, workers: int) -> float:
    shape = tuple(2 * n for n in f.shape)
    spectrum = _kernel_spectrum(f.shape, edge)
    potential = scipy.fft.irfftn(scipy.fft.rfftn(g, s=shape, workers=workers) * spectrum, s=shape, workers=workers)
    potential = potential[: f.shape[0], : f.shape[1], : f.shape[2]]
    volume = edge**3
    return float(-G * volume * volume * np.sum(f * potential))


def _downsample(values: np.ndarray) -> np.ndarray:
    nx, ny, nz = values.shape
    return values.reshape(nx // 2, 2, ny // 2, 2, nz // 2, 2).mean(axis=(1, 3, 5))


def common_grid(f_grid: DensityGrid, g_grid: DensityGrid) -> tuple[DensityGrid, DensityGrid]:
    """
    Embed two grids of equal voxel edge into one power-of-two box.
    """
    if not math.isclose(f_grid.voxel_edge, g_grid.voxel_edge, rel_tol=1e-12):
        raise RegridRequiredError(
            f"voxel edges differ: {f_grid.voxel_edge:g} m vs {g_grid.voxel_edge:g} m"
        )
    if f_grid.origin == g_grid.origin and f_grid.dims == g_grid.dims:
        return f_grid, g_grid
    edge = f_grid.voxel_edge
    lo = np.minimum(np.asarray(f_grid.origin), np.asarray(g_grid.origin))
    hi = np.maximum(
        np.asarray(f_grid.origin) + np.asarray(f_grid.dims) * edge,
        np.asarray(g_grid.origin) + np.asarray(g_grid.dims) * edge,
    )
    n = next_power_of_two(int(math.ceil(float(np.max(hi - lo)) / edge - 1e-9)))
    dims = (n, n, n)
    origin = tuple(float(x) for x in lo)
    return embed_grid(f_grid, origin, edge, dims), embed_grid(g_grid, origin, edge, dims)


def grid_interaction_energy_fft(
    f_grid: DensityGrid,
    g_grid: DensityGrid,
    consts: PhysicalConstants,
    max_bytes: int = DEFAULT_MAX_BYTES,
    workers: int = 1,
) -> EnergyResult:
    """
    U(f, g) on a common grid: potential of g by aperiodic (2x padded) FFT
    convolution with 1/r, then the inner product with f. The error estimate is
    the change against the same computation at half resolution.
    """
    f_grid, g_grid = common_grid(f_grid, g_grid)
    dims = f_grid.dims
    if not all(_is_power_of_two(n) for n in dims):
        raise GridSizeError(f"grid dims {dims} are not powers of two")
    needed = 6 * 8 * int(np.prod([2 * n for n in dims]))
    if needed > max_bytes:
        raise GridSizeError(f"FFT on {dims} needs about {needed / 2**30:.1f} GiB, bound is {max_bytes / 2**30:.1f} GiB")

    if not np.any(g_grid.values) or not np.any(f_grid.values):
        return EnergyResult(value=0.0, method=EnergyMethod.GRID_FFT, error_estimate=0.0)

    G = consts.G
    value = _fft_energy(f_grid.values, g_grid.values, f_grid.voxel_edge, G, workers)
    error = 0.0
    if all(n >= 4 for n in dims):
        coarse = _fft_energy(
            _downsample(f_grid.values), _downsample(g_grid.values), 2 * f_grid.voxel_edge, G, workers
        )
        error = abs(value - coarse)
    logger.debug("grid energy on %s: %.6e J (+- %.2e)", dims, value, error)
    return EnergyResult(value=value, method=EnergyMethod.GRID_FFT, error_estimate=error)


def _bounds(f: MassDensity) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(f, DensityGrid):
        lo = np.asarray(f.origin)
        return lo, lo + np.asarray(f.dims) * f.voxel_edge
    c, r = center_of(f), extent(f)
    return c - r, c + r


def common_grids(f: MassDensity, g: MassDensity, grid_dims: int) -> tuple[DensityGrid, DensityGrid]:
    """
    Put f and g on one grid. An existing grid fixes the voxel edge and
    lattice; the analytic partner is rasterized onto it.
    """
    grids = [x for x in (f, g) if isinstance(x, DensityGrid)]
    if len(grids) == 2:
        return common_grid(f, g)
    if not grids:
        origin, edge, dims = auto_box([f, g], None, grid_dims)
        return rasterize(f, origin, edge, dims), rasterize(g, origin, edge, dims)

    box = grids[0]
    edge = box.voxel_edge
    lo = np.minimum(_bounds(f)[0], _bounds(g)[0])
    hi = np.maximum(_bounds(f)[1], _bounds(g)[1])
    steps = np.floor((lo - np.asarray(box.origin)) / edge + 1e-9)
    origin = tuple(float(x) for x in np.asarray(box.origin) + steps * edge)
    n = next_power_of_two(int(math.ceil(float(np.max(hi - np.asarray(origin))) / edge - 1e-9)))
    dims = (n, n, n)
    return rasterize(f, origin, edge, dims), rasterize(g, origin, edge, dims)


# --------------------------------------------------------------------------
# dispatch


def interaction_energy(
    f: MassDensity,
    g: MassDensity,
    consts: PhysicalConstants,
    grid_dims: int = DEFAULT_GRID_DIMS,
    max_bytes: int = DEFAULT_MAX_BYTES,
) -> EnergyResult:
    """
    U(f, g): closed forms where they exist, the grid FFT otherwise.
    """
    result = _closed_form_energy(f, g, consts)
    if result is not None:
        return result
    logger.debug("no closed form for %s/%s, using the grid path", f.kind, g.kind)
    f_grid, g_grid = common_grids(f, g, grid_dims)
    return grid_interaction_energy_fft(f_grid, g_grid, consts, max_bytes=max_bytes)


# --------------------------------------------------------------------------
# quadrature oracle


def _piecewise_gauss(fn, lo: np.ndarray, hi: np.ndarray, breaks: np.ndarray, n: int) -> np.ndarray:
    """
    Composite Gauss-Legendre integral of fn over [lo, hi] (row-wise), split at
    breaks (shape (rows, k) or (k,)). fn maps an array of abscissae (rows, n)
    to integrand values of the same shape.
    """
    x, w = leggauss(n)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim == 1:
        breaks = np.broadcast_to(breaks, (lo.shape[0], breaks.shape[0]))
    cuts = np.clip(breaks, lo[:, None], hi[:, None])
    edges = np.sort(np.concatenate([lo[:, None], cuts, hi[:, None]], axis=1), axis=1)
    total = np.zeros(lo.shape[0])
    for j in range(edges.shape[1] - 1):
        a, b = edges[:, j], edges[:, j + 1]
        half = 0.5 * (b - a)
        if not np.any(half > 0):
            continue
        nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
        total += half * np.sum(w[None, :] * fn(nodes), axis=1)
    return total


def _shell_potential(atom: Atom, t: np.ndarray, n: int) -> np.ndarray:
    """
    \\int atom(s) / |t - s| ds by the shell theorem, integrals by Gauss rules.
    """
    t = np.asarray(t, dtype=float)
    if atom.is_point:
        return atom.mass / t
    support = atom.support
    breaks = np.asarray(atom.breaks())
    inner_hi = np.minimum(t, support)
    enclosed = _piecewise_gauss(lambda s: atom.density(s) * s * s, np.zeros_like(t), inner_hi, breaks, n)
    outer = _piecewise_gauss(lambda s: atom.density(s) * s, inner_hi, np.full_like(t, support), breaks, n)
    t_safe = np.where(t > 0, t, 1.0)
    return 4.0 * math.pi * (np.where(t > 0, enclosed / t_safe, 0.0) + outer)


def _gauss_pair(a: Atom, b: Atom, d: float, n: int) -> float:
    """
    \\int\\int a(r) b(s) / |r - s| in spherical coordinates about a's center,
    polar axis along the separation.
    """
    if a.is_point and b.is_point:
        if d == 0:
            raise DegenerateGeometryError("coincident point masses have infinite energy")
        return a.mass * b.mass / d
    if a.is_point:
        a, b = b, a
    if b.is_point:
        return b.mass * _shell_potential_point_source(a, d, n)

    b_breaks = np.asarray(b.breaks())

    def radial(r: np.ndarray) -> np.ndarray:
        flat = r.ravel()
        if d == 0.0:
            inner = 2.0 * _shell_potential(b, flat, n)
        else:
            safe = np.where(flat > 0, flat, 1.0)
            mu_breaks = (b_breaks[None, :] ** 2 - flat[:, None] ** 2 - d * d) / (2.0 * safe[:, None] * d)

            def angular(mu: np.ndarray) -> np.ndarray:
                dist = np.sqrt(np.maximum(flat[:, None] ** 2 + d * d + 2.0 * flat[:, None] * d * mu, 0.0))
                return _shell_potential(b, dist.ravel(), n).reshape(dist.shape)

            inner = _piecewise_gauss(angular, -np.ones_like(flat), np.ones_like(flat), mu_breaks, n)
        return (2.0 * math.pi * a.density(flat) * flat * flat * inner).reshape(r.shape)

    value = _piecewise_gauss(radial, np.zeros(1), np.full(1, a.support), np.asarray(a.breaks()), n)
    return float(value[0])


def _shell_potential_point_source(a: Atom, d: float, n: int) -> float:
    return float(_shell_potential(a, np.asarray([d]), n)[0])


def _gauss_energy(fa, ga, n: int, G: float) -> float:
    (atom_f, pos_f), (atom_g, pos_g) = fa, ga
    separations = np.linalg.norm(pos_f[:, None, :] - pos_g[None, :, :], axis=-1)
    cache: dict[float, float] = {}
    terms = []
    for d in separations.ravel():
        key = round(float(d), 15)
        if key not in cache:
            cache[key] = _gauss_pair(atom_f, atom_g, float(d), n)
        terms.append(cache[key])
    return -G * math.fsum(terms)


def _sample_atoms(atom: Atom, positions: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    idx = rng.integers(0, positions.shape[0], size=count)
    base = positions[idx]
    if atom.kind == "ball":
        radius = atom.radius * rng.random(count) ** (1.0 / 3.0)
        base = base + sampling.unit_vectors(rng, count) * radius[:, None]
    if atom.width > 0:
        base = base + atom.width * rng.standard_normal((count, 3))
    return base


def _monte_carlo_energy(fa, ga, spec: QuadratureSpec, G: float) -> tuple[float, float]:
    (atom_f, pos_f), (atom_g, pos_g) = fa, ga
    mass_f = atom_f.mass * pos_f.shape[0]
    mass_g = atom_g.mass * pos_g.shape[0]

    def block(index: int, count: int) -> tuple[float, float]:
        rng = sampling.stream(spec.seed, index)
        r = _sample_atoms(atom_f, pos_f, rng, count)
        s = _sample_atoms(atom_g, pos_g, rng, count)
        inv = 1.0 / np.linalg.norm(r - s, axis=1)
        return math.fsum(inv), math.fsum(inv * inv)

    sums = sampling.run_blocks(block, spec.points, spec.threads)
    total = math.fsum(x for x, _ in sums)
    total_sq = math.fsum(y for _, y in sums)
    mean = total / spec.points
    var = max(total_sq / spec.points - mean * mean, 0.0)
    stderr = math.sqrt(var / max(spec.points - 1, 1))
    scale = -G * mass_f * mass_g
    return scale * mean, abs(scale) * stderr


def interaction_energy_quadrature(
    f: MassDensity,
    g: MassDensity,
    spec: QuadratureSpec,
    consts: PhysicalConstants,
) -> EnergyResult:
    """
    Independent evaluation of U(f, g) for analytic densities: nested
    Gauss-Legendre rules over shell-theorem potentials, or importance-sampled
    Monte Carlo drawing points from f and g themselves.
    """
    fa, ga = atoms_of(f), atoms_of(g)
    if fa is None or ga is None:
        raise ConfigurationMismatchError("the quadrature oracle needs analytic densities (ball, blob, lattice)")

    if spec.scheme == QuadratureSpec.Scheme.MONTE_CARLO_IMPORTANCE:
        if fa[0].is_point and ga[0].is_point:
            raise DegenerateGeometryError("Monte-Carlo oracle cannot sample point-point pairs")
        value, stderr = _monte_carlo_energy(fa, ga, spec, consts.G)
        return EnergyResult(value=value, method=EnergyMethod.QUADRATURE_ORACLE, error_estimate=3.0 * stderr)

    n = spec.points
    levels = [max(4, n // 2), n, 2 * n]
    values = [_gauss_energy(fa, ga, m, consts.G) for m in levels]
    previous, error = abs(values[1] - values[0]), abs(values[2] - values[1])
    floor = 1e-12 * abs(values[2])
    if error > previous and error > floor:
        logger.error("oracle refinement diverging: %s", values)
        raise NumericalFailureError(f"quadrature not converging under refinement: {values}")
    logger.debug("oracle refinement %s", values)
    return EnergyResult(value=values[2], method=EnergyMethod.QUADRATURE_ORACLE, error_estimate=max(error, floor))
