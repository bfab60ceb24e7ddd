import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .densities import Vector3


class Branch(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    amplitude: complex
    com_position: Vector3


class CatState(BaseModel):
    """
    Superposition of c.o.m. branches, each tagged by an orthogonal environment
    state; only the branch weights matter.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    branches: tuple[Branch, ...] = Field(..., min_length=1)
    mass: float = Field(default=1.0, gt=0)

    @field_validator("branches")
    @classmethod
    def normalize(cls, value: tuple[Branch, ...]) -> tuple[Branch, ...]:
        norm = math.sqrt(sum(abs(branch.amplitude) ** 2 for branch in value))
        if norm == 0:
            raise ValueError("cat state has zero norm")
        return tuple(
            Branch(amplitude=branch.amplitude / norm, com_position=branch.com_position) for branch in value
        )

    @classmethod
    def from_weights(cls, positions: list[Vector3], weights: list[float], mass: float = 1.0) -> "CatState":
        if len(positions) != len(weights):
            raise ValueError("positions and weights differ in length")
        return cls(
            branches=tuple(
                Branch(amplitude=complex(math.sqrt(w)), com_position=tuple(p)) for p, w in zip(positions, weights)
            ),
            mass=mass,
        )

    def weights(self) -> np.ndarray:
        return np.array([abs(branch.amplitude) ** 2 for branch in self.branches])

    def com_positions(self) -> np.ndarray:
        return np.array([branch.com_position for branch in self.branches], dtype=float)


class Measurement(BaseModel):
    model_config = ConfigDict(frozen=True)

    branch_index: int
    new_state: CatState
    com_shift: Vector3


class MaskingReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    dp_rate: float
    env_rate: float
    ratio: float
    verdict: str
    kappa: float
    max_com_shift: float | None = None


class ConservationDemo(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    shifts: np.ndarray
    branch_indices: np.ndarray
    frequencies: tuple[float, ...]
    mean_shift: Vector3
    seed: int
