from enum import StrEnum
from typing import ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .densities import ORIGIN, NucleusProfile, Vector3


class NuclearConfiguration(BaseModel):
    """
    c.o.m. position x plus the independent relative coordinates q_1 .. q_{N-1}.
    The N-th nucleus follows from the c.o.m. constraint (equal nuclear masses).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    com_position: Vector3 = ORIGIN
    relative_coords: tuple[Vector3, ...] = ()
    nucleus_mass: float = Field(..., gt=0)
    profile: NucleusProfile = NucleusProfile()

    @property
    def size(self) -> int:
        return len(self.relative_coords) + 1

    def relative_positions(self) -> np.ndarray:
        """
        All N relative coordinates, the last one eliminated by sum(q) = 0.
        """
        q = np.asarray(self.relative_coords, dtype=float).reshape(-1, 3)
        last = -q.sum(axis=0, keepdims=True)
        return np.vstack([q, last])

    def positions(self) -> np.ndarray:
        return self.relative_positions() + np.asarray(self.com_position, dtype=float)


class SpreadModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    class Kind(StrEnum):
        NONE = "none"
        ISOTROPIC_GAUSSIAN = "isotropic_gaussian"

    kind: Kind = Kind.NONE
    width: float = Field(default=0.0, ge=0, description="Per-axis std of each q_i around its site, m")

    @property
    def is_rigid(self) -> bool:
        return self.kind == SpreadModel.Kind.NONE or self.width == 0.0


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    width_m: float
    correct_rate_hz: float
    correct_stderr_hz: float
    naive_rate_hz: float
    valid: bool

    CSV_COLUMNS: ClassVar[tuple[str, ...]] = ("width_m", "correct_rate_hz", "correct_stderr_hz", "naive_rate_hz", "valid")
