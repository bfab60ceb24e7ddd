from __future__ import annotations

import logging
import math
from pathlib import Path

from pydantic import ValidationError

from ..entities.constants import CSLParams, PhysicalConstants, RateConvention
from ..entities.densities import GranularLattice, MassDensity, NucleusProfile, UniformBall
from ..entities.scenario import BallGeometry, GridFileGeometry, LatticeGeometry, ScenarioConfig
from ..exceptions import ConfigError
from ..utils import load_settings
from .densities import granular_from_lattice
from .gridio import read_grid
from .rates import newton_frequency, nuclear_frequency

logger = logging.getLogger(__name__)


class Scenario:
    """
    A validated scenario file plus the objects built from it.
    """

    def __init__(self, config: ScenarioConfig, base_dir: Path):
        self.config = config
        self.base_dir = base_dir
        self.consts: PhysicalConstants = config.constants.build()
        self.resolution = config.resolution.build()
        self.convention: RateConvention = config.rate_convention.build()
        self.csl: CSLParams = config.csl_params.build() if config.csl_params else CSLParams()

    @classmethod
    def load(cls, path: Path) -> "Scenario":
        raw = load_settings(path)
        try:
            config = ScenarioConfig.model_validate(raw)
            scenario = cls(config, path.expanduser().resolve().parent)
        except ValidationError as exc:
            raise ConfigError(f"invalid scenario {path}: {exc}") from exc
        logger.info("loaded scenario %r from %s", config.name, path)
        return scenario

    def body(self) -> MassDensity:
        geometry = self.config.geometry
        match geometry:
            case BallGeometry():
                return UniformBall(mass=geometry.mass, radius=geometry.radius)
            case LatticeGeometry():
                return self.lattice()
            case GridFileGeometry():
                path = Path(geometry.path).expanduser()
                if not path.is_absolute():
                    path = self.base_dir / path
                return read_grid(path)
        raise ConfigError(f"unsupported geometry {geometry!r}")

    def lattice(self) -> GranularLattice:
        geometry = self.config.geometry
        if not isinstance(geometry, LatticeGeometry):
            raise ConfigError("this computation needs a lattice geometry")
        profile = NucleusProfile(kind=geometry.profile, size=geometry.sigma_nuc)
        return granular_from_lattice(geometry.a, geometry.dims, geometry.nucleus_mass, profile)

    def displacements(self, override: float | None = None) -> list[float]:
        values = [override] if override is not None else list(self.config.displacements)
        if not values:
            raise ConfigError("no displacements given (scenario 'displacements' or --dx)")
        if any(v < 0 for v in values):
            raise ConfigError("displacements must be non-negative")
        return values

    def oscillator(self) -> tuple[float, float, float] | None:
        """
        (mass, Newton frequency, expansion length) for the first-order rate.

        Without a matter section a ball oscillates at its bulk density with
        scale R. With one, the nuclear density is used with scale sigma_nuc,
        for balls and lattices alike.
        """
        geometry = self.config.geometry
        matter = self.config.matter
        match geometry:
            case BallGeometry():
                mass = geometry.mass
                if matter is None:
                    rho = mass / (4.0 / 3.0 * math.pi * geometry.radius**3)
                    return mass, newton_frequency(rho, self.consts), geometry.radius
                radius = matter.reading_radius or geometry.radius
            case LatticeGeometry() if matter is not None:
                mass = geometry.nucleus_mass * math.prod(geometry.dims)
                radius = matter.reading_radius
            case _:
                return None
        omega = nuclear_frequency(matter.build(), self.consts, matter.reading, radius)
        return mass, omega, matter.sigma_nuc

    def echo(self) -> list[str]:
        c = self.consts
        res = self.resolution
        return [
            f"scenario={self.config.name}",
            f"G={c.G!r} hbar={c.hbar!r} m0={c.m0!r}",
            f"kappa={self.convention.kappa!r} smearing={res.profile} sigma={res.sigma!r}",
        ]
