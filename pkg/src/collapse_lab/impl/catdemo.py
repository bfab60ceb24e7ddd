"""
Cat states entangled with orthogonal environment tags: c.o.m. expectation
before and after a which-branch measurement, and how collapse compares with
environmental decoherence.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from ..entities.catdemo import Branch, CatState, ConservationDemo, MaskingReport, Measurement
from ..entities.constants import PhysicalConstants, RateConvention
from ..entities.results import CatnessValue
from ..exceptions import DegenerateGeometryError
from . import sampling
from .catness import rate_from_catness

logger = logging.getLogger(__name__)


def com_expectation(s: CatState) -> np.ndarray:
    return s.weights() @ s.com_positions()


def _uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """
    Uniform draws for trials start .. start + count - 1; trial t always gets
    the same number for a given seed.
    """
    out = np.empty(count)
    first, last = start // sampling.BLOCK_SIZE, (start + count - 1) // sampling.BLOCK_SIZE
    for block in range(first, last + 1):
        draws = sampling.stream(seed, block).random(sampling.BLOCK_SIZE)
        lo = max(start, block * sampling.BLOCK_SIZE)
        hi = min(start + count, (block + 1) * sampling.BLOCK_SIZE)
        out[lo - start : hi - start] = draws[lo - block * sampling.BLOCK_SIZE : hi - block * sampling.BLOCK_SIZE]
    return out


def _pick(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cumulative = np.cumsum(weights)
    cumulative /= cumulative[-1]
    return np.minimum(np.searchsorted(cumulative, u, side="right"), len(weights) - 1)


def measure_branch(s: CatState, seed: int, trial: int = 0) -> Measurement:
    """
    Pick a branch with Born weights and collapse onto it.
    """
    if len(s.branches) < 2:
        raise DegenerateGeometryError("measurement needs at least two branches")
    index = int(_pick(s.weights(), _uniforms(seed, trial, 1))[0])
    chosen = s.branches[index]
    phase = chosen.amplitude / abs(chosen.amplitude)
    collapsed = CatState(branches=(Branch(amplitude=phase, com_position=chosen.com_position),), mass=s.mass)
    shift = np.asarray(chosen.com_position, dtype=float) - com_expectation(s)
    return Measurement(branch_index=index, new_state=collapsed, com_shift=tuple(float(x) for x in shift))


def demo_conservation(
    separation: float,
    trials: int,
    seed: int,
    weights: Sequence[float] = (0.5, 0.5),
    mass: float = 1.0,
) -> ConservationDemo:
    """
    Repeat the measurement of a two-branch cat with branches 0 and
    (separation, 0, 0). Each shot moves the c.o.m. by a macroscopic amount;
    the average shift tends to zero.
    """
    if trials < 1:
        raise DegenerateGeometryError("trials must be at least 1")
    state = CatState.from_weights([(0.0, 0.0, 0.0), (separation, 0.0, 0.0)], list(weights), mass=mass)
    positions = state.com_positions()
    indices = _pick(state.weights(), _uniforms(seed, 0, trials))
    shifts = positions[indices] - com_expectation(state)
    counts = np.bincount(indices, minlength=len(state.branches))
    mean = shifts.mean(axis=0)
    logger.debug("conservation demo: %d trials, frequencies %s", trials, counts / trials)
    return ConservationDemo(
        shifts=shifts,
        branch_indices=indices,
        frequencies=tuple(float(c) / trials for c in counts),
        mean_shift=tuple(float(x) for x in mean),
        seed=seed,
    )


def masking_report(
    env_decoherence_rate: float,
    dp_catness: CatnessValue,
    conv: RateConvention,
    consts: PhysicalConstants,
    branch_separation: float | None = None,
) -> MaskingReport:
    """
    Compare the environment's decoherence rate with the DP collapse rate.
    "masked" means the environment wins.
    """
    if env_decoherence_rate < 0:
        raise DegenerateGeometryError("decoherence rate must be non-negative")
    dp_rate = rate_from_catness(dp_catness, conv, consts).value
    if env_decoherence_rate == 0:
        ratio = 0.0
    elif dp_rate == 0:
        ratio = math.inf
    else:
        ratio = env_decoherence_rate / dp_rate
    return MaskingReport(
        dp_rate=dp_rate,
        env_rate=env_decoherence_rate,
        ratio=ratio,
        verdict="masked" if ratio > 1 else "unmasked",
        kappa=conv.kappa,
        max_com_shift=None if branch_separation is None else 0.5 * branch_separation,
    )
