from enum import StrEnum
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vector3 = tuple[float, float, float]

ORIGIN: Vector3 = (0.0, 0.0, 0.0)


class KernelProfile(StrEnum):
    GAUSSIAN = "gaussian"
    UNIFORM_BALL = "uniform_ball"


class Resolution(BaseModel):
    """
    Spatial resolution sigma of a collapse model and the kernel realizing it.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma: float = Field(..., gt=0, description="Resolution length, m")
    profile: KernelProfile = KernelProfile.GAUSSIAN


class NucleusProfile(BaseModel):
    """
    Shape carried by each lattice site. size is the ball radius or the Gaussian
    standard deviation; size 0 is a point nucleus. smoothing is a Gaussian
    blur already applied to a ball profile.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    class Kind(StrEnum):
        BALL = "ball"
        GAUSSIAN = "gaussian"

    kind: Kind = Kind.BALL
    size: float = Field(default=0.0, ge=0)
    smoothing: float = Field(default=0.0, ge=0)

    @property
    def is_point(self) -> bool:
        return self.size == 0.0 and self.smoothing == 0.0

    @property
    def radius(self) -> float:
        """
        Radius used by the non-overlap checks.
        """
        return self.size


class UniformBall(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["ball"] = "ball"
    mass: float = Field(..., gt=0)
    radius: float = Field(..., gt=0)
    center: Vector3 = ORIGIN
    smoothing: float = Field(default=0.0, ge=0, description="Gaussian blur std already applied, m")

    @property
    def density(self) -> float:
        return self.mass / (4.0 * np.pi * self.radius**3 / 3.0)


class GaussianBlob(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["gaussian"] = "gaussian"
    mass: float = Field(..., gt=0)
    width: float = Field(..., ge=0, description="Per-axis standard deviation; 0 is a point mass")
    center: Vector3 = ORIGIN


class GranularLattice(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["lattice"] = "lattice"
    sites: tuple[Vector3, ...]
    nucleus_mass: float = Field(..., gt=0)
    nucleus_profile: NucleusProfile = NucleusProfile()
    com_offset: Vector3 = ORIGIN

    def positions(self) -> np.ndarray:
        """
        Absolute nucleus positions, shape (N, 3).
        """
        if not self.sites:
            return np.zeros((0, 3))
        return np.asarray(self.sites, dtype=float) + np.asarray(self.com_offset, dtype=float)


class DensityGrid(BaseModel):
    """
    Voxel grid of cell-averaged densities, values indexed [ix, iy, iz].
    """

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    kind: Literal["grid"] = "grid"
    origin: Vector3
    voxel_edge: float = Field(..., gt=0)
    dims: tuple[int, int, int]
    values: np.ndarray
    mass_error: float = 0.0

    @field_validator("dims")
    @classmethod
    def check_dims(cls, value: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(n <= 0 for n in value):
            raise ValueError("grid dims must be positive")
        return value

    @field_validator("values", mode="before")
    @classmethod
    def freeze_values(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64, copy=True)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def check_values(self) -> "DensityGrid":
        if self.values.shape != tuple(self.dims):
            raise ValueError(f"values shape {self.values.shape} does not match dims {self.dims}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("grid values must be finite and non-negative")
        return self

    @property
    def voxel_volume(self) -> float:
        return self.voxel_edge**3


MassDensity = Annotated[
    Union[UniformBall, GaussianBlob, GranularLattice, DensityGrid],
    Field(discriminator="kind"),
]
