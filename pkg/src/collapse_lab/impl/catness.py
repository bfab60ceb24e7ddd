"""
Squared catness of two mass configurations and its conversion to lifetimes.

    l_G^2   = 2 U(f, g) - U(f, f) - U(g, g)             (coarse-grained f, g)
    l_CSL^2 = (hbar lambda sigma^3 / m0^2) \\int (f - g)^2  (Gaussian smearing at sigma)
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..entities.constants import CSLParams, PhysicalConstants, RateConvention
from ..entities.densities import DensityGrid, KernelProfile, MassDensity, Resolution
from ..entities.results import CatnessValue, CollapseModel, CollapseRate, EnergyMethod, EnergyResult
from ..exceptions import DegenerateGeometryError, ResolutionUndersampledError
from .densities import MAX_AUTO_DIMS, auto_box, coarse_grain, convolve_grid, next_power_of_two, rasterize
from .newton import (
    DEFAULT_GRID_DIMS,
    Atom,
    atoms_of,
    common_grids,
    grid_interaction_energy_fft,
    has_closed_form,
    inside_overlap,
    interaction_energy,
    offset_moment,
    offset_moment_gap,
    pair_energy_gap,
    radial_gaussian_average,
)

logger = logging.getLogger(__name__)


def _paired_atoms(f: MassDensity, g: MassDensity) -> tuple[Atom, np.ndarray, np.ndarray] | None:
    """
    (atom, positions of f, positions of g) when f and g are the same atoms moved around.
    """
    fa, ga = atoms_of(f), atoms_of(g)
    if fa is None or ga is None:
        return None
    (atom_f, pos_f), (atom_g, pos_g) = fa, ga
    if atom_f != atom_g or pos_f.shape != pos_g.shape:
        return None
    return atom_f, pos_f, pos_g


def gap_sum(gap, pos_f: np.ndarray, pos_g: np.ndarray) -> float:
    """
    sum_ij [gap(p_i - p_j, -delta_j) + gap(q_i - q_j, -delta_i)], delta = q - p,
    which equals 2 W(f, g) - W(f, f) - W(g, g) for any pair functional W whose
    increments are gap(r, delta) = W(|r + delta|) - W(|r|).
    """
    delta = pos_g - pos_f
    n = pos_f.shape[0]
    r_f = (pos_f[:, None, :] - pos_f[None, :, :]).reshape(-1, 3)
    r_g = (pos_g[:, None, :] - pos_g[None, :, :]).reshape(-1, 3)
    shift_j = np.broadcast_to(-delta[None, :, :], (n, n, 3)).reshape(-1, 3)
    shift_i = np.broadcast_to(-delta[:, None, :], (n, n, 3)).reshape(-1, 3)
    diagonal = np.eye(n, dtype=bool).ravel()
    terms_f, terms_g = gap(r_f, shift_j), gap(r_g, shift_i)
    # self terms first; they carry the leading order for small shifts
    self_part = math.fsum(terms_f[diagonal]) + math.fsum(terms_g[diagonal])
    cross_part = math.fsum(terms_f[~diagonal]) + math.fsum(terms_g[~diagonal])
    return self_part + cross_part


def dp_catness_of(
    f: MassDensity, g: MassDensity, consts: PhysicalConstants, grid_dims: int = DEFAULT_GRID_DIMS
) -> EnergyResult:
    """
    2U(f, g) - U(f, f) - U(g, g) for already coarse-grained densities.
    """
    paired = _paired_atoms(f, g)
    if paired is not None and has_closed_form(paired[0], paired[0]):
        atom, pos_f, pos_g = paired
        value = gap_sum(lambda r, d: pair_energy_gap(atom, atom, r, d, consts), pos_f, pos_g)
        return EnergyResult(value=value, method=EnergyMethod.CLOSED_FORM)

    fa, ga = atoms_of(f), atoms_of(g)
    if fa is not None and ga is not None and all(
        has_closed_form(a, b) for a, b in ((fa[0], ga[0]), (fa[0], fa[0]), (ga[0], ga[0]))
    ):
        u_fg = interaction_energy(f, g, consts)
        u_ff = interaction_energy(f, f, consts)
        u_gg = interaction_energy(g, g, consts)
        return EnergyResult(value=2.0 * u_fg.value - u_ff.value - u_gg.value, method=EnergyMethod.CLOSED_FORM)

    f_grid, g_grid = common_grids(f, g, grid_dims)
    u_fg = grid_interaction_energy_fft(f_grid, g_grid, consts)
    u_ff = grid_interaction_energy_fft(f_grid, f_grid, consts)
    u_gg = grid_interaction_energy_fft(g_grid, g_grid, consts)
    value = 2.0 * u_fg.value - u_ff.value - u_gg.value
    error = 2.0 * u_fg.error_estimate + u_ff.error_estimate + u_gg.error_estimate
    return EnergyResult(value=value, method=EnergyMethod.GRID_FFT, error_estimate=error)


def catness_G(
    f: MassDensity,
    g: MassDensity,
    res: Resolution,
    consts: PhysicalConstants,
    grid_dims: int = DEFAULT_GRID_DIMS,
) -> CatnessValue:
    """
    DP catness of f and g at resolution res.
    """
    f_res, g_res = coarse_grain(f, res), coarse_grain(g, res)
    result = dp_catness_of(f_res, g_res, consts, grid_dims)
    value = result.value + 0.0
    if value < 0:
        if abs(value) > max(result.error_estimate, 1e-300):
            logger.warning("negative DP catness %.3e J clipped to 0", value)
        value = 0.0
    return CatnessValue(
        value=value,
        model=CollapseModel.DP,
        resolution=res,
        method=result.method,
        error_estimate=result.error_estimate,
    )


# --------------------------------------------------------------------------
# CSL


def _ball_overlap_volume(d: np.ndarray, R: float) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    inside = np.clip(2.0 * R - d, 0.0, None)
    return math.pi * (4.0 * R + d) * inside**2 / 12.0


def _smoothed_overlap_volume(R: float, t: float, d: float) -> float:
    """
    Overlap volume of two balls averaged over a Gaussian offset of pair width t.
    Below contact it is 4 pi R^3 / 3 - pi R^2 |d| + pi |d|^3 / 12, averaged moment by moment.
    """
    if inside_overlap(R, t, d):
        first, third = offset_moment(1, d, t), offset_moment(3, d, t)
        return 4.0 / 3.0 * math.pi * R**3 - math.pi * R * R * first + math.pi / 12.0 * third
    return radial_gaussian_average(lambda x: _ball_overlap_volume(x, R), d, t, [2.0 * R])


def _smoothed_overlap_gap(R: float, t: float, d0: float, d1: float) -> float:
    if inside_overlap(R, t, d0, d1):
        return -math.pi * R * R * offset_moment_gap(1, d0, d1, t) + math.pi / 12.0 * offset_moment_gap(3, d0, d1, t)
    return _smoothed_overlap_volume(R, t, d1) - _smoothed_overlap_volume(R, t, d0)


def _ball_pair_width(a: Atom, b: Atom, sigma: float) -> float:
    return math.sqrt(a.width**2 + b.width**2 + 2.0 * sigma**2)


def _ball_density(a: Atom) -> float:
    return a.mass / (4.0 / 3.0 * math.pi * a.radius**3)


def _csl_overlap(a: Atom, b: Atom, d: np.ndarray, sigma: float) -> np.ndarray:
    """
    \\int a~ b~ for two atoms at center distance d, both smeared by a Gaussian sigma.
    """
    d = np.asarray(d, dtype=float)
    if a.kind == "gaussian" and b.kind == "gaussian":
        S2 = a.width**2 + b.width**2 + 2.0 * sigma**2
        return a.mass * b.mass * (2.0 * math.pi * S2) ** -1.5 * np.exp(-(d**2) / (2.0 * S2))
    R, t = a.radius, _ball_pair_width(a, b, sigma)
    values = [_smoothed_overlap_volume(R, t, float(x)) for x in d.ravel()]
    return _ball_density(a) * _ball_density(b) * np.asarray(values).reshape(d.shape)


def _csl_gap(a: Atom, sigma: float):
    """
    gap(r, delta) = O(|r + delta|) - O(|r|) for the smeared overlap O.
    """

    def gap(r: np.ndarray, delta: np.ndarray) -> np.ndarray:
        if a.kind == "gaussian":
            S2 = 2.0 * a.width**2 + 2.0 * sigma**2
            scale = a.mass**2 * (2.0 * math.pi * S2) ** -1.5
            r2 = np.einsum("...i,...i->...", r, r)
            step = 2.0 * np.einsum("...i,...i->...", r, delta) + np.einsum("...i,...i->...", delta, delta)
            return scale * np.exp(-r2 / (2.0 * S2)) * np.expm1(-step / (2.0 * S2))
        R, t = a.radius, _ball_pair_width(a, a, sigma)
        d0 = np.linalg.norm(r, axis=-1)
        d1 = np.linalg.norm(r + delta, axis=-1)
        values = [_smoothed_overlap_gap(R, t, float(x0), float(x1)) for x0, x1 in zip(d0, d1)]
        return _ball_density(a) ** 2 * np.asarray(values)

    return gap


def _csl_grid_integral(f: MassDensity, g: MassDensity, sigma: float) -> float:
    smear = Resolution(sigma=sigma, profile=KernelProfile.GAUSSIAN)
    grids = [x for x in (f, g) if isinstance(x, DensityGrid)]
    if grids:
        f_grid, g_grid = common_grids(f, g, 1)
    else:
        _, side, _ = auto_box([f, g], None, 1)
        n = next_power_of_two(math.ceil(side / (sigma / 2.0)))
        if n > MAX_AUTO_DIMS:
            raise ResolutionUndersampledError(side / MAX_AUTO_DIMS, sigma)
        origin, edge, dims = auto_box([f, g], side / n, n)
        f_grid, g_grid = rasterize(f, origin, edge, dims), rasterize(g, origin, edge, dims)
    f_s, g_s = convolve_grid(f_grid, smear), convolve_grid(g_grid, smear)
    return float(math.fsum(((f_s.values - g_s.values) ** 2).ravel()) * f_s.voxel_volume)


def csl_overlap_integral(f: MassDensity, g: MassDensity, sigma: float) -> tuple[float, EnergyMethod]:
    """
    \\int (f~ - g~)^2 with Gaussian smearing at sigma, in kg^2 / m^3.
    """
    paired = _paired_atoms(f, g)
    if paired is not None:
        atom, pos_f, pos_g = paired
        return -gap_sum(_csl_gap(atom, sigma), pos_f, pos_g), EnergyMethod.CLOSED_FORM

    fa, ga = atoms_of(f), atoms_of(g)
    if fa is not None and ga is not None:
        (atom_f, pos_f), (atom_g, pos_g) = fa, ga
        if atom_f.kind == atom_g.kind == "gaussian":

            def total(atom_a, pa, atom_b, pb) -> float:
                d = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)
                return math.fsum(_csl_overlap(atom_a, atom_b, d, sigma).ravel())

            value = (
                total(atom_f, pos_f, atom_f, pos_f)
                + total(atom_g, pos_g, atom_g, pos_g)
                - 2.0 * total(atom_f, pos_f, atom_g, pos_g)
            )
            return value, EnergyMethod.CLOSED_FORM

    logger.debug("CSL overlap of %s/%s through a grid", f.kind, g.kind)
    return _csl_grid_integral(f, g, sigma), EnergyMethod.GRID_FFT


def catness_CSL(f: MassDensity, g: MassDensity, p: CSLParams, consts: PhysicalConstants) -> CatnessValue:
    """
    Mass-proportional CSL catness.
    """
    integral, method = csl_overlap_integral(f, g, p.sigma)
    prefactor = consts.hbar * p.lambda_ * p.sigma**3 / p.m0**2
    return CatnessValue(
        # + 0.0 drops the sign of a -0.0 overlap
        value=max(prefactor * integral, 0.0) + 0.0,
        model=CollapseModel.CSL,
        resolution=Resolution(sigma=p.sigma, profile=KernelProfile.GAUSSIAN),
        method=method,
    )


# --------------------------------------------------------------------------
# lifetimes


def lifetime(l2: CatnessValue, conv: RateConvention, consts: PhysicalConstants) -> float:
    """
    tau = hbar / (kappa l^2); math.inf when the configurations coincide.
    """
    if l2.value == 0.0:
        return math.inf
    return consts.hbar / (conv.kappa * l2.value)


def rate_from_catness(l2: CatnessValue | float, conv: RateConvention, consts: PhysicalConstants) -> CollapseRate:
    value = l2.value if isinstance(l2, CatnessValue) else float(l2)
    if value < 0:
        raise DegenerateGeometryError("catness must be non-negative")
    return CollapseRate(value=conv.kappa * value / consts.hbar + 0.0, kappa=conv.kappa)
