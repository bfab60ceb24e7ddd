from .catdemo import Branch, CatState, ConservationDemo, MaskingReport, Measurement
from .constants import CSLParams, MatterSpec, NuclearDensityReading, PhysicalConstants, RateConvention
from .densities import (
    DensityGrid,
    GaussianBlob,
    GranularLattice,
    KernelProfile,
    MassDensity,
    NucleusProfile,
    Resolution,
    UniformBall,
    Vector3,
)
from .ensembles import NuclearConfiguration, SpreadModel, SweepRow
from .results import (
    CatnessValue,
    CheckResult,
    CollapseModel,
    CollapseRate,
    EnergyMethod,
    EnergyResult,
    EquilibriumState,
    QuadratureSpec,
    RateEstimate,
)
from .scenario import ScenarioConfig

__all__ = [
    "Branch",
    "CatState",
    "ConservationDemo",
    "MaskingReport",
    "Measurement",
    "CSLParams",
    "MatterSpec",
    "NuclearDensityReading",
    "PhysicalConstants",
    "RateConvention",
    "DensityGrid",
    "GaussianBlob",
    "GranularLattice",
    "KernelProfile",
    "MassDensity",
    "NucleusProfile",
    "Resolution",
    "UniformBall",
    "Vector3",
    "NuclearConfiguration",
    "SpreadModel",
    "SweepRow",
    "CatnessValue",
    "CheckResult",
    "CollapseModel",
    "CollapseRate",
    "EnergyMethod",
    "EnergyResult",
    "EquilibriumState",
    "QuadratureSpec",
    "RateEstimate",
    "ScenarioConfig",
]
