"""
Self-verification suites. Each check returns a CheckResult; the CLI prints
them as JSON lines and exits non-zero when any fails.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator

import numpy as np

from ..entities.constants import CSLParams, MatterSpec, PhysicalConstants, RateConvention
from ..entities.densities import GaussianBlob, MassDensity, NucleusProfile, Resolution, UniformBall
from ..entities.ensembles import SpreadModel
from ..entities.results import CatnessValue, CheckResult, CollapseModel, EnergyMethod, QuadratureSpec, RateEstimate
from ..exceptions import CollapseLabError, ConfigError
from .catdemo import demo_conservation, masking_report
from .catness import catness_CSL, catness_G, rate_from_catness
from .densities import granular_from_lattice, scale_mass, translate
from .ensembles import (
    blur_first_rate,
    com_marginal_rate,
    lattice_from_matter,
    separability_bound,
    single_nucleus_catness,
)
from .newton import common_grids, grid_interaction_energy_fft, interaction_energy, interaction_energy_quadrature
from .rates import (
    amplification,
    com_rate_small_displacement,
    equilibrium_rate,
    equilibrium_state,
    newton_frequency,
    nuclear_frequency,
)

logger = logging.getLogger(__name__)

ORACLE_GRID_DIMS = 128
ORACLE_POINTS = 16
SPREAD_SAMPLES = 10_000


def _check(
    name: str,
    ok: bool,
    value: float | None = None,
    expected: float | None = None,
    tolerance: float | None = None,
    detail: str | None = None,
) -> CheckResult:
    return CheckResult(
        check=name,
        status="pass" if ok else "fail",
        value=value,
        expected=expected,
        tolerance=tolerance,
        detail=detail,
    )


def _relative(name: str, value: float, expected: float, rel: float, detail: str | None = None) -> CheckResult:
    ok = abs(value - expected) <= rel * abs(expected)
    return _check(name, ok, value, expected, rel, detail)


def _band(name: str, value: float, lo: float, hi: float) -> CheckResult:
    return _check(name, lo <= value <= hi, value, math.sqrt(lo * hi), None, f"band [{lo:g}, {hi:g}]")


# --------------------------------------------------------------------------
# oracles


def oracle_battery() -> list[tuple[str, MassDensity, MassDensity]]:
    """
    Geometries where closed form, grid and quadrature must all agree.
    """
    battery: list[tuple[str, MassDensity, MassDensity]] = []
    ball = UniformBall(mass=1.0, radius=1.0)
    for d in (0.0, 0.5, 1.0, 2.0, 3.0):
        battery.append((f"ball-ball d/R={d:g}", ball, translate(ball, (d, 0.0, 0.0))))
    blob = GaussianBlob(mass=1.0, width=1.0)
    for d in (0.0, 1.0, 3.0):
        battery.append((f"blob-blob d={d:g}", blob, translate(blob, (d, 0.0, 0.0))))
    battery.append(("blob-blob unequal", blob, GaussianBlob(mass=2.0, width=0.5, center=(1.5, 0.0, 0.0))))

    gaussian_nuclei = granular_from_lattice(
        1.0, (2, 2, 2), 1.0, NucleusProfile(kind=NucleusProfile.Kind.GAUSSIAN, size=0.25)
    )
    battery.append(("lattice-lattice gaussian d=0", gaussian_nuclei, gaussian_nuclei))
    battery.append(("lattice-lattice gaussian d=0.5", gaussian_nuclei, translate(gaussian_nuclei, (0.5, 0.0, 0.0))))
    ball_nuclei = granular_from_lattice(1.0, (2, 2, 2), 1.0, NucleusProfile(kind=NucleusProfile.Kind.BALL, size=0.2))
    battery.append(("lattice-lattice ball d=(0.3,0.2,0)", ball_nuclei, translate(ball_nuclei, (0.3, 0.2, 0.0))))
    return battery


def oracle_checks(consts: PhysicalConstants, seed: int, threads: int) -> Iterator[CheckResult]:
    spec = QuadratureSpec(points=ORACLE_POINTS, seed=seed, threads=threads)
    for name, f, g in oracle_battery():
        closed = interaction_energy(f, g, consts)
        f_grid, g_grid = common_grids(f, g, ORACLE_GRID_DIMS)
        grid = grid_interaction_energy_fft(f_grid, g_grid, consts)
        oracle = interaction_energy_quadrature(f, g, spec, consts)
        results = {"closed": closed, "grid": grid, "oracle": oracle}
        for (a_name, a), (b_name, b) in (
            (("closed", closed), ("oracle", oracle)),
            (("closed", closed), ("grid", grid)),
            (("oracle", oracle), ("grid", grid)),
        ):
            tolerance = max(0.01 * abs(a.value), a.error_estimate + b.error_estimate)
            yield _check(
                f"oracle {name}: {a_name} vs {b_name}",
                abs(a.value - b.value) <= tolerance,
                b.value,
                a.value,
                tolerance,
                ", ".join(f"{k}={v.method}" for k, v in results.items()),
            )


# --------------------------------------------------------------------------
# invariants


def quadratic_law(consts: PhysicalConstants) -> tuple[float, float]:
    """
    (log-log slope of l_G^2(d) for unit balls over d/R in [1e-4, 1e-2],
    coefficient c in l^2 = c M omega_G^2 d^2 at the smallest d).
    """
    ball = UniformBall(mass=1.0, radius=1.0)
    res = Resolution(sigma=1e-6)
    ds = np.logspace(-4, -2, 9)
    l2 = np.array([catness_G(ball, translate(ball, (d, 0.0, 0.0)), res, consts).value for d in ds])
    slope = float(np.polyfit(np.log(ds), np.log(l2), 1)[0])
    omega2 = consts.G * ball.mass / ball.radius**3
    c = float(l2[0] / (ball.mass * omega2 * ds[0] ** 2))
    return slope, c


def invariant_checks(consts: PhysicalConstants, seed: int, threads: int) -> Iterator[CheckResult]:
    res = Resolution(sigma=1e-3)
    ball = UniformBall(mass=1.0, radius=1.0)
    moved = translate(ball, (0.3, 0.0, 0.0))
    blob = GaussianBlob(mass=1.0, width=0.5)
    blob_moved = translate(blob, (0.2, 0.1, 0.0))

    yield _check("catness_G(f, f) = 0", catness_G(ball, ball, res, consts).value == 0.0)
    forward = catness_G(ball, moved, res, consts).value
    backward = catness_G(moved, ball, res, consts).value
    yield _relative("catness_G symmetric", backward, forward, 1e-12)
    scaled = catness_G(scale_mass(blob, 2.0), scale_mass(blob_moved, 2.0), res, consts).value
    unscaled = catness_G(blob, blob_moved, res, consts).value
    yield _relative("catness_G quadratic mass scaling", scaled, 4.0 * unscaled, 1e-10)
    shifted = catness_G(translate(ball, (5.0, -2.0, 1.0)), translate(moved, (5.0, -2.0, 1.0)), res, consts).value
    yield _relative("catness_G translation invariant", shifted, forward, 1e-9)

    csl = CSLParams(sigma=0.1)
    yield _check("catness_CSL(f, f) = 0", catness_CSL(blob, blob, csl, consts).value == 0.0)
    yield _relative(
        "catness_CSL quadratic mass scaling",
        catness_CSL(scale_mass(blob, 2.0), scale_mass(blob_moved, 2.0), csl, consts).value,
        4.0 * catness_CSL(blob, blob_moved, csl, consts).value,
        1e-10,
    )

    plateau = 12.0 / 5.0 * consts.G
    near = catness_G(ball, translate(ball, (100.0, 0.0, 0.0)), res, consts).value
    yield _relative("plateau at 100R, far field restored", near + 2.0 * consts.G / 100.0, plateau, 0.005)
    far = catness_G(ball, translate(ball, (1000.0, 0.0, 0.0)), res, consts).value
    yield _relative("plateau at 1000R", far, plateau, 0.005)

    slope, c = quadratic_law(consts)
    yield _check("quadratic law slope", abs(slope - 2.0) <= 0.01, slope, 2.0, 0.01)
    yield _check(
        "quadratic law coefficient",
        abs(c - 1.0) <= 0.01,
        c,
        1.0,
        0.01,
        "l^2 = c M w_G^2 d^2; kappa = 1/2 turns kappa l^2 / hbar into 1/2 M w_G^2 d^2 / hbar",
    )

    conv = RateConvention()
    omega = newton_frequency(3.0 / (4.0 * math.pi), consts)
    d = 1e-3
    small = catness_G(ball, translate(ball, (d, 0.0, 0.0)), Resolution(sigma=1e-6), consts)
    from_catness = rate_from_catness(small, conv, consts)
    formula = com_rate_small_displacement(ball.mass, omega, d, conv, consts)
    yield _relative("small-displacement rate matches catness rate", from_catness.value, formula.value, 0.01)

    scaled_consts = consts.model_copy(update={"hbar": 10.0 * consts.hbar})
    state = equilibrium_state(1e-3, omega, consts)
    scaled_state = equilibrium_state(1e-3, omega, scaled_consts)
    yield _check("equilibrium rate independent of hbar", state.equilibrium_rate == scaled_state.equilibrium_rate)
    yield _relative("equilibrium width scales as sqrt(hbar)", scaled_state.width / state.width, math.sqrt(10.0), 1e-12)
    yield _relative("spreading balances collapse at the equilibrium width", state.collapse_rate, state.spreading_rate, 1e-12)

    demo = demo_conservation(1.0, 100_000, seed)
    yield _check("Born frequency", abs(demo.frequencies[0] - 0.5) <= 0.01, demo.frequencies[0], 0.5, 0.01)
    magnitudes = np.linalg.norm(demo.shifts, axis=1)
    yield _check(
        "every shot shifts the c.o.m. by half the separation",
        bool(np.allclose(magnitudes, 0.5, rtol=1e-12, atol=0.0)),
    )

    yield from ensemble_checks(consts, seed, threads)


def _separable(name: str, estimate: RateEstimate, expected: float, expected_se: float, bound: float) -> CheckResult:
    # cross terms shift the mean systematically by up to bound, on top of the sampling noise
    tolerance = max(3.0 * math.hypot(estimate.standard_error, expected_se), bound * expected)
    return _check(
        name,
        abs(estimate.mean - expected) <= tolerance,
        estimate.mean,
        expected,
        tolerance,
        f"overlaps={estimate.overlaps}",
    )


def ensemble_checks(
    consts: PhysicalConstants, seed: int, threads: int, samples: int = SPREAD_SAMPLES
) -> Iterator[CheckResult]:
    """
    Separability and spread independence of the c.o.m. marginal rate on a
    2x2x2 lattice of default matter, checked within the cross-term bound.
    """
    matter = MatterSpec()
    lattice = lattice_from_matter(matter)
    bound = separability_bound(lattice)
    conv = RateConvention()
    dx = (0.1 * matter.sigma_nuc, 0.0, 0.0)
    a = matter.lattice_constant

    rigid = com_marginal_rate(lattice, SpreadModel(), dx, conv, 1, seed, consts)
    single = single_nucleus_catness(lattice.nucleus_mass, lattice.nucleus_profile, dx, None, consts)
    separable = len(lattice.sites) * rate_from_catness(single, conv, consts).value
    yield _relative("rigid lattice rate is N x single nucleus", rigid.mean, separable, bound)

    previous, label = rigid, "rigid"
    for fraction in (0.1, 0.2, 0.3):
        spread = SpreadModel(kind=SpreadModel.Kind.ISOTROPIC_GAUSSIAN, width=fraction * a)
        estimate = com_marginal_rate(lattice, spread, dx, conv, samples, seed, consts, threads=threads)
        references = [(rigid, "rigid")] + ([] if previous is rigid else [(previous, label)])
        for reference, name in references:
            yield _separable(
                f"spread independence, {fraction:g}a against {name}",
                estimate,
                reference.mean,
                reference.standard_error,
                bound,
            )
        yield _separable(f"spread {fraction:g}a agrees with N x single nucleus", estimate, separable, 0.0, bound)
        previous, label = estimate, f"{fraction:g}a"

    spread = SpreadModel(kind=SpreadModel.Kind.ISOTROPIC_GAUSSIAN, width=0.1 * a)
    serial = com_marginal_rate(lattice, spread, dx, conv, samples, seed, consts, threads=1)
    parallel = com_marginal_rate(lattice, spread, dx, conv, samples, seed, consts, threads=max(threads, 4))
    yield _check("Monte-Carlo mean independent of thread count", serial.mean == parallel.mean, parallel.mean, serial.mean)

    naive_zero = blur_first_rate(lattice, SpreadModel(), dx, conv, consts)
    yield _check("blur-first equals correct rate without spread", naive_zero.value == rigid.mean)
    wide = SpreadModel(kind=SpreadModel.Kind.ISOTROPIC_GAUSSIAN, width=a)
    naive = blur_first_rate(lattice, wide, dx, conv, consts)
    yield _band("blur-first suppression at spread a", rigid.mean / naive.value, 1e10, 1e14)


# --------------------------------------------------------------------------
# magnitudes


def magnitude_checks(consts: PhysicalConstants, seed: int, threads: int) -> Iterator[CheckResult]:
    matter = MatterSpec()
    yield _band("nuclear Newton frequency [1/s]", nuclear_frequency(matter, consts), 1e2, 1e4)
    yield _band("granularity amplification", amplification(matter, consts), 3e11, 3e12)
    omega = newton_frequency(matter.rho, consts)
    yield _band("equilibrium lifetime [h]", 1.0 / equilibrium_rate(omega) / 3600.0, 0.2, 2.0)
    yield _relative("Newton frequency at 1000 kg/m3", omega, 5.2873e-4, 1e-4)

    conv = RateConvention()
    rate = com_rate_small_displacement(1e-3, 528.7, 1e-15, conv, consts)
    yield _relative("nuclear-resolution c.o.m. rate [1/s]", rate.value, 1.325e6, 1e-3)

    csl = CSLParams()
    mass = 1e-3
    radius = (3.0 * mass / (4.0 * math.pi * matter.rho)) ** (1.0 / 3.0)
    ball = UniformBall(mass=mass, radius=radius)
    l2 = catness_CSL(ball, translate(ball, (10.0 * radius, 0.0, 0.0)), csl, consts).value
    reduction = 2.0 * consts.hbar * csl.lambda_ * csl.sigma**3 * matter.rho * mass / csl.m0**2
    yield _relative("disjoint CSL catness vs 2 rho M reduction", l2, reduction, 0.01)
    yield _relative("disjoint CSL catness [J]", l2, 7.5e-19, 0.02)

    catness = CatnessValue(
        value=rate.value * consts.hbar / conv.kappa,
        model=CollapseModel.DP,
        resolution=Resolution(sigma=matter.sigma_nuc),
        method=EnergyMethod.CLOSED_FORM,
    )
    report = masking_report(1e9, catness, conv, consts)
    yield _relative("masking ratio", report.ratio, 755.0, 0.01, report.verdict)


SUITES: dict[str, Callable[[PhysicalConstants, int, int], Iterator[CheckResult]]] = {
    "oracles": oracle_checks,
    "invariants": invariant_checks,
    "paperNumbers": magnitude_checks,
}


def run_suite(name: str, consts: PhysicalConstants, seed: int, threads: int = 1) -> Iterator[CheckResult]:
    """
    Run the named suite. A check that raises is reported as failed and the
    suite stops there.
    """
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    try:
        for result in SUITES[name](consts, seed, threads):
            if not result.passed:
                logger.warning("check failed: %s", result.check)
            yield result
    except CollapseLabError as exc:
        logger.exception("suite %s aborted", name)
        yield _check(f"{name} aborted", False, detail=f"{type(exc).__name__}: {exc}")
