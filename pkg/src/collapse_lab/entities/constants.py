from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PhysicalConstants(BaseModel):
    """
    Constants injected into every computation; never read from globals.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    G: float = Field(default=6.67430e-11, gt=0, description="Newton constant, m^3 kg^-1 s^-2")
    hbar: float = Field(default=1.054571817e-34, gt=0, description="Reduced Planck constant, J s")
    m0: float = Field(default=1.67262192e-27, gt=0, description="Reference nucleon mass, kg")


class CSLParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    lambda_: float = Field(default=1e-17, gt=0, alias="lambda", description="Collapse rate parameter, 1/s")
    sigma: float = Field(default=1e-7, gt=0, description="Gaussian smearing length, m")
    m0: float = Field(default=1.67262192e-27, gt=0, description="Reference nucleon mass, kg")


class RateConvention(BaseModel):
    """
    Prefactor kappa in rate = kappa * l^2 / hbar.

    kappa = 1 is the bare lifetime law tau = hbar / l^2; kappa = 1/2 reproduces
    the first-order c.o.m. rate 1/2 M w^2 dx^2 / hbar.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kappa: float = 0.5

    @field_validator("kappa")
    @classmethod
    def check_kappa(cls, value: float) -> float:
        if value not in (0.5, 1.0):
            raise ValueError("kappa must be 1 or 1/2")
        return float(value)


class NuclearDensityReading(StrEnum):
    A_OVER_SIGMA = "a_over_sigma"
    R_OVER_SIGMA = "r_over_sigma"


class MatterSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rho: float = Field(default=1000.0, gt=0, description="Bulk density, kg/m^3")
    lattice_constant: float = Field(default=1e-10, gt=0, description="Interatomic spacing a, m")
    sigma_nuc: float = Field(default=1e-14, gt=0, description="Nuclear radius, m")

    @model_validator(mode="after")
    def check_separation(self) -> "MatterSpec":
        # a == sigma_nuc is allowed: nuclei filling their cells
        if self.lattice_constant < self.sigma_nuc:
            raise ValueError("lattice_constant must not be smaller than sigma_nuc")
        return self
