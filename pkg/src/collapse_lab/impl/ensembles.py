"""
Collapse rates of granular bodies: full nuclear configurations, the c.o.m.
marginal rate averaged over spread-out nuclei, and the blur-first contrast.
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Iterable, Sequence
from typing import TextIO

import numpy as np

from ..entities.constants import MatterSpec, PhysicalConstants, RateConvention
from ..entities.densities import GranularLattice, KernelProfile, NucleusProfile, Resolution, Vector3
from ..entities.ensembles import NuclearConfiguration, SpreadModel, SweepRow
from ..entities.results import CatnessValue, CollapseModel, CollapseRate, RateEstimate
from ..exceptions import ConfigurationMismatchError, DegenerateGeometryError, SpreadOverlapError
from ..utils import format_float
from . import sampling
from .catness import catness_G, dp_catness_of, gap_sum, rate_from_catness
from .densities import coarse_grain, granular_from_lattice
from .newton import Atom, pair_energy_gap, profile_atom

logger = logging.getLogger(__name__)

MAX_OVERLAP_FRACTION = 0.01
SEPARABILITY_FACTOR = 10.0


def lattice_from_matter(spec: MatterSpec, dims: Sequence[int] = (2, 2, 2)) -> GranularLattice:
    """
    Homogeneous-ball nuclei of radius sigma_nuc and mass rho a^3 on a cubic
    lattice of spacing a. The nuclei are already resolved, so rates on this
    lattice take res=None.
    """
    a = spec.lattice_constant
    profile = NucleusProfile(kind=NucleusProfile.Kind.BALL, size=spec.sigma_nuc)
    return granular_from_lattice(a, dims, spec.rho * a**3, profile)


def own_resolution(profile: NucleusProfile) -> Resolution:
    """
    The resolution a resolved nucleus profile stands for.
    """
    atom = profile_atom(profile, 1.0)
    if atom.is_point:
        raise DegenerateGeometryError("point nuclei need a resolution")
    if atom.kind == "ball" and atom.width == 0.0:
        return Resolution(sigma=atom.radius, profile=KernelProfile.UNIFORM_BALL)
    return Resolution(sigma=atom.width, profile=KernelProfile.GAUSSIAN)


def configuration_density(c: NuclearConfiguration) -> GranularLattice:
    sites = tuple(tuple(float(x) for x in row) for row in c.positions())
    return GranularLattice(sites=sites, nucleus_mass=c.nucleus_mass, nucleus_profile=c.profile)


def configuration_from_lattice(lattice: GranularLattice, shift: Vector3 | None = None) -> NuclearConfiguration:
    """
    The lattice as (c.o.m., q_1 .. q_{N-1}), optionally with the c.o.m. moved by shift.
    """
    positions = lattice.positions()
    com = positions.mean(axis=0)
    relative = positions - com
    if shift is not None:
        com = com + np.asarray(shift, dtype=float)
    return NuclearConfiguration(
        com_position=tuple(float(x) for x in com),
        relative_coords=tuple(tuple(float(x) for x in row) for row in relative[:-1]),
        nucleus_mass=lattice.nucleus_mass,
        profile=lattice.nucleus_profile,
    )


def full_configuration_catness(
    c: NuclearConfiguration,
    c_prime: NuclearConfiguration,
    res: Resolution | None,
    consts: PhysicalConstants,
) -> CatnessValue:
    """
    DP catness between two nuclear configurations, summed over all N^2
    nucleus pairs in closed form. res=None takes the nuclei as resolved.
    """
    if c.size != c_prime.size:
        raise ConfigurationMismatchError(f"configurations have {c.size} and {c_prime.size} nuclei")
    if c.nucleus_mass != c_prime.nucleus_mass or c.profile != c_prime.profile:
        raise ConfigurationMismatchError("configurations differ in nucleus mass or profile")
    f, g = configuration_density(c), configuration_density(c_prime)
    if res is not None:
        return catness_G(f, g, res, consts)
    resolution = own_resolution(c.profile)
    result = dp_catness_of(f, g, consts)
    return CatnessValue(
        value=max(result.value, 0.0) + 0.0,
        model=CollapseModel.DP,
        resolution=resolution,
        method=result.method,
        error_estimate=result.error_estimate,
    )


def single_nucleus_catness(
    nucleus_mass: float,
    profile: NucleusProfile,
    dx: Vector3,
    res: Resolution | None,
    consts: PhysicalConstants,
) -> CatnessValue:
    """
    Catness of one isolated nucleus displaced by dx.
    """
    origin = NuclearConfiguration(nucleus_mass=nucleus_mass, profile=profile)
    moved = origin.model_copy(update={"com_position": tuple(float(x) for x in dx)})
    return full_configuration_catness(origin, moved, res, consts)


def _resolved_atom(lattice: GranularLattice, res: Resolution | None) -> Atom:
    profile = lattice.nucleus_profile
    if res is not None:
        single = GranularLattice(sites=((0.0, 0.0, 0.0),), nucleus_mass=lattice.nucleus_mass, nucleus_profile=profile)
        resolved = coarse_grain(single, res)
        if not isinstance(resolved, GranularLattice):
            raise ConfigurationMismatchError("nucleus profile has no closed form at this resolution")
        profile = resolved.nucleus_profile
    atom = profile_atom(profile, lattice.nucleus_mass)
    if atom.is_point:
        raise DegenerateGeometryError("point nuclei need a resolution")
    return atom


def _contact_distance(atom: Atom) -> float:
    return 2.0 * (atom.radius if atom.kind == "ball" else atom.width)


def _nearest_spacing(positions: np.ndarray) -> float:
    if positions.shape[0] < 2:
        return math.inf
    d = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    return float(np.min(d[~np.eye(positions.shape[0], dtype=bool)]))


def separability_bound(lattice: GranularLattice, res: Resolution | None = None) -> float:
    """
    Relative size of the inter-nuclear cross terms, 10 (r_nuc / a)^3 with a the
    nearest spacing. Within it a lattice rate equals N single-nucleus rates and
    does not depend on how far the nuclei spread.
    """
    ratio = 0.5 * _contact_distance(_resolved_atom(lattice, res)) / _nearest_spacing(lattice.positions())
    return SEPARABILITY_FACTOR * ratio**3


def _rigid_rate(
    lattice: GranularLattice, dx: Vector3, conv: RateConvention, consts: PhysicalConstants, res: Resolution | None
) -> float:
    c = configuration_from_lattice(lattice)
    moved = configuration_from_lattice(lattice, dx)
    if res is None:
        atom = _resolved_atom(lattice, None)
        positions = c.positions()
        value = gap_sum(
            lambda r, d: pair_energy_gap(atom, atom, r, d, consts), positions, moved.positions()
        )
        l2 = max(value, 0.0)
    else:
        l2 = full_configuration_catness(c, moved, res, consts).value
    return rate_from_catness(l2, conv, consts).value


def com_marginal_rate(
    lattice: GranularLattice,
    spread: SpreadModel,
    dx: Vector3,
    conv: RateConvention,
    samples: int,
    seed: int,
    consts: PhysicalConstants,
    res: Resolution | None = None,
    threads: int = 1,
) -> RateEstimate:
    """
    Monte-Carlo average of kappa l^2 / hbar over spread nuclear coordinates q,
    both branches sharing the same q and differing only by the c.o.m. shift dx.

    Samples where two nuclei come closer than their contact distance are
    counted and left out of the mean; more than 1% of them aborts the run.
    """
    if samples < 1:
        raise DegenerateGeometryError("samples must be at least 1")
    shift = np.asarray(dx, dtype=float)
    positions = lattice.positions()
    if np.linalg.norm(shift) >= 0.5 * _nearest_spacing(positions):
        raise DegenerateGeometryError("c.o.m. shift must stay below half the lattice spacing")

    if spread.is_rigid:
        rate = _rigid_rate(lattice, dx, conv, consts, res)
        return RateEstimate(mean=rate, standard_error=0.0, samples=samples, seed=seed)

    atom = _resolved_atom(lattice, res)
    contact = _contact_distance(atom)
    sites = positions - positions.mean(axis=0)
    n = sites.shape[0]
    scale = conv.kappa / consts.hbar

    def gap(r: np.ndarray, d: np.ndarray) -> np.ndarray:
        return pair_energy_gap(atom, atom, r, d, consts)

    def block(index: int, count: int) -> tuple[list[float], int]:
        rng = sampling.stream(seed, index)
        noise = spread.width * rng.standard_normal((count, n - 1, 3))
        rates, overlaps = [], 0
        for k in range(count):
            q = np.empty_like(sites)
            q[:-1] = sites[:-1] + noise[k]
            q[-1] = -q[:-1].sum(axis=0)
            if n > 1 and _nearest_spacing(q) < contact:
                overlaps += 1
                continue
            l2 = gap_sum(gap, q, q + shift)
            rates.append(scale * max(l2, 0.0))
        return rates, overlaps

    results = sampling.run_blocks(block, samples, threads)
    rates = [x for block_rates, _ in results for x in block_rates]
    overlaps = sum(count for _, count in results)
    if overlaps:
        logger.warning("%d of %d spread samples had overlapping nuclei", overlaps, samples)
    if overlaps > MAX_OVERLAP_FRACTION * samples or not rates:
        raise SpreadOverlapError(overlaps, samples)

    mean = math.fsum(rates) / len(rates)
    if len(rates) > 1:
        variance = math.fsum((x - mean) ** 2 for x in rates) / (len(rates) - 1)
        stderr = math.sqrt(variance / len(rates))
    else:
        stderr = 0.0
    logger.debug("spread %.3e m: rate %.6e +- %.2e Hz", spread.width, mean, stderr)
    return RateEstimate(mean=mean, standard_error=stderr, samples=samples, seed=seed, overlaps=overlaps)


def blur_first_rate(
    lattice: GranularLattice,
    spread: SpreadModel,
    dx: Vector3,
    conv: RateConvention,
    consts: PhysicalConstants,
    res: Resolution | None = None,
) -> CollapseRate:
    """
    The naive procedure: smear every nucleus by the spread first, then take
    the catness of the rigidly shifted smeared body.
    """
    if spread.is_rigid:
        return CollapseRate(value=_rigid_rate(lattice, dx, conv, consts, res), kappa=conv.kappa, label="naive")
    sharp = lattice if res is None else coarse_grain(lattice, res)
    blurred = coarse_grain(sharp, Resolution(sigma=spread.width, profile=KernelProfile.GAUSSIAN))
    moved = blurred.model_copy(update={"com_offset": tuple(float(a + b) for a, b in zip(blurred.com_offset, dx))})
    atom = profile_atom(blurred.nucleus_profile, blurred.nucleus_mass)
    l2 = gap_sum(lambda r, d: pair_energy_gap(atom, atom, r, d, consts), blurred.positions(), moved.positions())
    value = rate_from_catness(max(l2, 0.0), conv, consts).value
    return CollapseRate(value=value, kappa=conv.kappa, label="naive")


def helium_regime_sweep(
    lattice: GranularLattice,
    widths: Sequence[float],
    dx: Vector3,
    conv: RateConvention,
    samples: int,
    seed: int,
    consts: PhysicalConstants,
    res: Resolution | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """
    Correct (c.o.m. marginal) and naive (blur-first) rates across spread widths.
    Widths whose samples overlap too often give rows marked invalid.
    """
    if not widths:
        raise DegenerateGeometryError("widths must not be empty")
    if any(b < a for a, b in zip(widths, widths[1:])):
        raise DegenerateGeometryError("widths must be sorted ascending")

    rows = []
    for width in widths:
        spread = (
            SpreadModel()
            if width == 0
            else SpreadModel(kind=SpreadModel.Kind.ISOTROPIC_GAUSSIAN, width=width)
        )
        naive = blur_first_rate(lattice, spread, dx, conv, consts, res)
        try:
            estimate = com_marginal_rate(lattice, spread, dx, conv, samples, seed, consts, res, threads)
        except SpreadOverlapError as exc:
            logger.info("width %.3e m marked invalid: %s", width, exc)
            rows.append(
                SweepRow(
                    width_m=width,
                    correct_rate_hz=math.nan,
                    correct_stderr_hz=math.nan,
                    naive_rate_hz=naive.value,
                    valid=False,
                )
            )
            continue
        rows.append(
            SweepRow(
                width_m=width,
                correct_rate_hz=estimate.mean,
                correct_stderr_hz=estimate.standard_error,
                naive_rate_hz=naive.value,
                valid=True,
            )
        )
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SweepRow.CSV_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                format_float(row.width_m),
                format_float(row.correct_rate_hz),
                format_float(row.correct_stderr_hz),
                format_float(row.naive_rate_hz),
                "true" if row.valid else "false",
            ]
        )
