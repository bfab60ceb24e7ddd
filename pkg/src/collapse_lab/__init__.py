from .entities.constants import CSLParams, PhysicalConstants, RateConvention
from .entities.densities import GaussianBlob, GranularLattice, Resolution, UniformBall
from .impl.catness import catness_CSL, catness_G, rate_from_catness
from .impl.scenario import Scenario

__all__ = [
    "CSLParams",
    "PhysicalConstants",
    "RateConvention",
    "GaussianBlob",
    "GranularLattice",
    "Resolution",
    "UniformBall",
    "catness_CSL",
    "catness_G",
    "rate_from_catness",
    "Scenario",
]
