import math
from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .densities import Resolution


class EnergyMethod(StrEnum):
    CLOSED_FORM = "ClosedForm"
    GRID_FFT = "GridFFT"
    QUADRATURE_ORACLE = "QuadratureOracle"


class EnergyResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float = Field(..., description="Interaction energy, J")
    method: EnergyMethod
    error_estimate: float = Field(default=0.0, ge=0)


class QuadratureSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    class Scheme(StrEnum):
        PRODUCT_GAUSS = "product_gauss"
        MONTE_CARLO_IMPORTANCE = "monte_carlo_importance"

    scheme: Scheme = Scheme.PRODUCT_GAUSS
    points: int = Field(default=48, ge=8, description="Gauss points per sub-interval, or Monte-Carlo samples")
    seed: int = Field(default=0, ge=0, lt=2**64)
    threads: int = Field(default=1, ge=1)


class CollapseModel(StrEnum):
    DP = "dp"
    CSL = "csl"


class CatnessValue(BaseModel):
    """
    Squared catness l^2 in joules.
    """

    model_config = ConfigDict(frozen=True)

    value: float = Field(..., ge=0)
    model: CollapseModel
    resolution: Resolution
    method: EnergyMethod = EnergyMethod.CLOSED_FORM
    error_estimate: float = Field(default=0.0, ge=0)


class CollapseRate(BaseModel):
    """
    A rate with the provenance flags every report has to carry.
    """

    model_config = ConfigDict(frozen=True)

    value: float = Field(..., ge=0, description="1/s")
    kappa: float
    regime_valid: bool | None = None
    heuristic: bool = False
    label: str | None = None

    @property
    def lifetime(self) -> float:
        return math.inf if self.value == 0 else 1.0 / self.value


class EquilibriumState(BaseModel):
    model_config = ConfigDict(frozen=True)

    width: float
    spreading_rate: float
    collapse_rate: float
    equilibrium_rate: float
    heuristic: bool = True


class RateEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    standard_error: float = Field(..., ge=0)
    samples: int = Field(..., ge=1)
    seed: int
    overlaps: int = 0

    @model_validator(mode="after")
    def check_finite(self) -> "RateEstimate":
        if not math.isfinite(self.mean):
            raise ValueError("rate estimate mean must be finite")
        return self


class CheckResult(BaseModel):
    """
    Outcome of one verification check, emitted as a JSON line.
    """

    model_config = ConfigDict(frozen=True)

    check: str
    status: Literal["pass", "fail"]
    value: float | None = None
    expected: float | None = None
    tolerance: float | None = None
    detail: str | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"
