from enum import StrEnum
from typing import Annotated, Literal, Union

from pydantic import AfterValidator, BaseModel, BeforeValidator, ConfigDict, Field
from pydantic.alias_generators import to_camel

from ..exceptions import ConfigError
from ..utils import parse_quantity
from .constants import CSLParams, MatterSpec, NuclearDensityReading, PhysicalConstants, RateConvention
from .densities import KernelProfile, NucleusProfile, Resolution


def _quantity(dimension: str):
    def parse(value):
        try:
            return parse_quantity(value, dimension)
        except ConfigError as exc:
            raise ValueError(str(exc)) from exc

    return BeforeValidator(parse)


def _positive(value: float) -> float:
    if not value > 0:
        raise ValueError("must be positive")
    return value


Length = Annotated[float, _quantity("length")]
PositiveLength = Annotated[float, _quantity("length"), AfterValidator(_positive)]
Mass = Annotated[float, _quantity("mass"), AfterValidator(_positive)]
Rate = Annotated[float, _quantity("rate"), AfterValidator(_positive)]
Density = Annotated[float, _quantity("density"), AfterValidator(_positive)]
Plain = Annotated[float, _quantity(None)]


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", alias_generator=to_camel, populate_by_name=True)


class ModelChoice(StrEnum):
    DP = "dp"
    CSL = "csl"
    BOTH = "both"


class ConstantsSection(_Section):
    G: Plain | None = Field(default=None, alias="G")
    hbar: Plain | None = None
    m0: Mass | None = None

    def build(self) -> PhysicalConstants:
        return PhysicalConstants(**self.model_dump(exclude_none=True, by_alias=False))


class BallGeometry(_Section):
    kind: Literal["ball"] = "ball"
    mass: Mass
    radius: PositiveLength


class LatticeGeometry(_Section):
    kind: Literal["lattice"] = "lattice"
    a: PositiveLength
    dims: tuple[int, int, int] = (2, 2, 2)
    nucleus_mass: Mass
    sigma_nuc: Length = 0.0
    profile: NucleusProfile.Kind = NucleusProfile.Kind.BALL


class GridFileGeometry(_Section):
    kind: Literal["gridFile"] = "gridFile"
    path: str


Geometry = Annotated[Union[BallGeometry, LatticeGeometry, GridFileGeometry], Field(discriminator="kind")]


class ResolutionSection(_Section):
    sigma: PositiveLength
    profile: KernelProfile = KernelProfile.GAUSSIAN

    def build(self) -> Resolution:
        return Resolution(sigma=self.sigma, profile=self.profile)


class CSLSection(_Section):
    lambda_: Rate = Field(default=1e-17, alias="lambda")
    sigma: PositiveLength = 1e-7
    m0: Mass = 1.67262192e-27

    def build(self) -> CSLParams:
        return CSLParams(lambda_=self.lambda_, sigma=self.sigma, m0=self.m0)


class RateConventionSection(_Section):
    kappa: float = 0.5

    def build(self) -> RateConvention:
        return RateConvention(kappa=self.kappa)


class MonteCarloSection(_Section):
    samples: int = Field(default=10_000, ge=1)
    seed: int | None = Field(default=None, ge=0, lt=2**64)
    spread_widths: tuple[Length, ...] = ()


class MatterSection(_Section):
    rho: Density = 1000.0
    a: PositiveLength = 1e-10
    sigma_nuc: PositiveLength = 1e-14
    reading: NuclearDensityReading = NuclearDensityReading.A_OVER_SIGMA
    reading_radius: PositiveLength | None = None

    def build(self) -> MatterSpec:
        return MatterSpec(rho=self.rho, lattice_constant=self.a, sigma_nuc=self.sigma_nuc)


class ScenarioConfig(_Section):
    """
    Declarative description of one computation, read from a JSON scenario file.
    """

    name: str
    model: ModelChoice = ModelChoice.DP
    constants: ConstantsSection = ConstantsSection()
    geometry: Geometry
    resolution: ResolutionSection
    csl_params: CSLSection | None = None
    rate_convention: RateConventionSection = RateConventionSection()
    displacements: tuple[Length, ...] = ()
    mc: MonteCarloSection | None = None
    matter: MatterSection | None = None
    env_decoherence_rate: Annotated[float, _quantity("rate")] | None = None
