from .catdemo import demo_conservation, masking_report, measure_branch
from .catness import catness_CSL, catness_G, lifetime, rate_from_catness
from .ensembles import blur_first_rate, com_marginal_rate, helium_regime_sweep
from .newton import interaction_energy, interaction_energy_quadrature
from .scenario import Scenario

__all__ = [
    "demo_conservation",
    "masking_report",
    "measure_branch",
    "catness_CSL",
    "catness_G",
    "lifetime",
    "rate_from_catness",
    "blur_first_rate",
    "com_marginal_rate",
    "helium_regime_sweep",
    "interaction_energy",
    "interaction_energy_quadrature",
    "Scenario",
]
