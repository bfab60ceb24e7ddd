"""
Closed-form rate formulas of the Newton-oscillator picture.

The balance relations (equilibrium width and rate) are order-of-magnitude
statements implemented as equalities; their results carry heuristic=True.
"""

from __future__ import annotations

import math

from ..entities.constants import MatterSpec, NuclearDensityReading, PhysicalConstants, RateConvention
from ..entities.results import CollapseRate, EquilibriumState
from ..exceptions import DegenerateGeometryError

# small-displacement formulas hold while dx stays below this share of the scale they expand in
REGIME_FRACTION = 0.1


def newton_frequency(rho: float, consts: PhysicalConstants) -> float:
    """
    omega_G = sqrt(4 pi G rho / 3), the oscillation frequency of a test mass
    through a homogeneous ball of density rho.
    """
    if rho <= 0:
        raise DegenerateGeometryError("density must be positive")
    return math.sqrt(4.0 * math.pi * consts.G * rho / 3.0)


def nuclear_density(
    spec: MatterSpec,
    reading: NuclearDensityReading = NuclearDensityReading.A_OVER_SIGMA,
    radius: float | None = None,
) -> float:
    """
    Effective density inside the nuclei: rho (a / sigma_nuc)^3, or
    rho (R / sigma_nuc)^3 under the literal reading with body radius R.
    """
    match reading:
        case NuclearDensityReading.A_OVER_SIGMA:
            ratio = spec.lattice_constant / spec.sigma_nuc
        case NuclearDensityReading.R_OVER_SIGMA:
            if radius is None or radius <= 0:
                raise DegenerateGeometryError("the R/sigma reading needs a positive body radius")
            ratio = radius / spec.sigma_nuc
        case _:
            raise ValueError(f"unknown reading {reading!r}")
    return spec.rho * ratio**3


def nuclear_frequency(
    spec: MatterSpec,
    consts: PhysicalConstants,
    reading: NuclearDensityReading = NuclearDensityReading.A_OVER_SIGMA,
    radius: float | None = None,
) -> float:
    return newton_frequency(nuclear_density(spec, reading, radius), consts)


def amplification(
    spec: MatterSpec,
    consts: PhysicalConstants,
    reading: NuclearDensityReading = NuclearDensityReading.A_OVER_SIGMA,
    radius: float | None = None,
) -> float:
    """
    (omega_nucl / omega_G)^2, the factor by which granularity shortens lifetimes.
    """
    omega = newton_frequency(spec.rho, consts)
    return (nuclear_frequency(spec, consts, reading, radius) / omega) ** 2


def com_rate_small_displacement(
    M: float,
    omega: float,
    dx: float,
    conv: RateConvention,
    consts: PhysicalConstants,
    regime_scale: float | None = None,
    heuristic: bool = False,
) -> CollapseRate:
    """
    kappa M omega^2 dx^2 / hbar.

    regime_scale is the length the formula expands in (ball radius for bulk
    matter, sigma_nuc for nuclear matter); when given, regime_valid records
    whether dx is small against it. The rate is computed either way.
    heuristic marks an omega that is itself an order-of-magnitude estimate,
    such as the nuclear frequency.
    """
    if dx < 0:
        raise DegenerateGeometryError("displacement must be non-negative")
    value = conv.kappa * M * omega * omega * dx * dx / consts.hbar
    regime_valid = None if regime_scale is None else dx <= REGIME_FRACTION * regime_scale
    return CollapseRate(value=value, kappa=conv.kappa, regime_valid=regime_valid, heuristic=heuristic)


def equilibrium_width(M: float, omega: float, consts: PhysicalConstants) -> float:
    if M <= 0 or omega <= 0:
        raise DegenerateGeometryError("mass and frequency must be positive")
    return math.sqrt(consts.hbar / (M * omega))


def spreading_rate(M: float, width: float, consts: PhysicalConstants) -> float:
    """
    hbar / (M dx^2), the rate at which a free packet of width dx spreads.
    """
    return consts.hbar / (M * width * width)


def equilibrium_rate(omega: float) -> float:
    """
    Collapse rate at the equilibrium width. It equals omega and so carries no hbar.
    """
    if omega <= 0:
        raise DegenerateGeometryError("frequency must be positive")
    return omega


def equilibrium_state(M: float, omega: float, consts: PhysicalConstants) -> EquilibriumState:
    width = equilibrium_width(M, omega, consts)
    collapse = com_rate_small_displacement(M, omega, width, RateConvention(kappa=1.0), consts)
    return EquilibriumState(
        width=width,
        spreading_rate=spreading_rate(M, width, consts),
        collapse_rate=collapse.value,
        equilibrium_rate=equilibrium_rate(omega),
    )
