"""Discrete-time engine: dynamic transition matrices + cohort allocation.

Each cycle rebuilds the susceptible-to-infected probability from current
prevalence (herd-immunity feedback) and advances the cohort by the matrix
product, then adds births to the susceptible pool.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (
    OPPOSITE_SEX,
    STRATA,
    CohortState,
    DegeneratePopulationError,
    Intervention,
    ParameterSet,
    ProbabilityOverflowError,
    Stratum,
    Trajectory,
    effective_coverage,
    force_of_infection,
    rate_to_probability,
    weighted_prevalence,
)
from .ode import pack_parameters

__all__ = ["MarkovConfig", "build_transition_matrix", "step", "run", "run_batch"]


@dataclass(frozen=True)
class MarkovConfig:
    horizon_cycles: int = 100
    cycle_length: float = 1.0  # years

    def __post_init__(self) -> None:
        if self.horizon_cycles < 1:
            raise ValueError("horizon_cycles must be >= 1")
        if self.cycle_length <= 0:
            raise ValueError("cycle_length must be > 0")


def _overflow_check(label: str, exit_mass: float) -> None:
    if exit_mass > 1.0 + 1e-12:
        raise ProbabilityOverflowError(
            f"exit probabilities from {label} sum to {exit_mass:.6f} > 1; "
            "reduce the cycle length or the parameter draw"
        )


def build_transition_matrix(
    state: CohortState,
    params: ParameterSet,
    stratum: Stratum,
    intervention: Intervention = Intervention.STATUS_QUO,
    cycle_length: float = 1.0,
) -> np.ndarray:
    """5x5 per-cycle transition matrix for one stratum at the current state.

    Row r holds the probabilities of moving from state r to each state s
    within one cycle. The susceptible-to-infected entry is dynamic,
    ``1 - exp(-lambda_t * cycle_length)`` with lambda_t recomputed from the
    prevalence embedded in ``state``; the remaining rows carry the
    ParameterSet's per-cycle probabilities with the residual mass on the
    diagonal. Death is absorbing.
    """
    mix = weighted_prevalence(params.omega, state.infected, state.alive)
    cov, eff = effective_coverage(params, intervention)
    b = STRATA.index(stratum)
    psi = mix.psi_bar[OPPOSITE_SEX[stratum.sex]]
    lam = force_of_infection(params.beta, params.omega[b], psi, cov, eff)
    p12 = rate_to_probability(lam * cycle_length)
    p23, p34, p45, p15 = (params.trans_2_3, params.trans_3_4,
                          params.trans_4_5, params.trans_1_5)

    _overflow_check("SUSCEPTIBLE", p12 + p15)
    _overflow_check("INFECTED", p23 + p15)
    _overflow_check("ASYMPTOMATIC", p34 + p15)
    _overflow_check("MORBID", p45 + p15)

    return np.array([
        [1.0 - p12 - p15, p12, 0.0, 0.0, p15],
        [0.0, 1.0 - p23 - p15, p23, 0.0, p15],
        [0.0, 0.0, 1.0 - p34 - p15, p34, p15],
        [0.0, 0.0, 0.0, 1.0 - p45 - p15, p45 + p15],
        [0.0, 0.0, 0.0, 0.0, 1.0],
    ])


def step(
    state: CohortState,
    matrices: np.ndarray,
    chi: float,
    cycle_length: float = 1.0,
) -> CohortState:
    """Advance the cohort one cycle: allocation by matrix product, then births.

    ``matrices`` holds one row-stochastic 5x5 matrix per stratum. Births
    (``chi * alive * cycle_length``, with alive taken before the transition)
    enter the same stratum's susceptible pool, so the population total grows
    by exactly the birth inflow.
    """
    matrices = np.asarray(matrices, dtype=float)
    if matrices.shape != (4, 5, 5):
        raise ValueError(f"matrices must be (4, 5, 5), got {matrices.shape}")
    alive_before = state.alive
    # n_{t+1},s = sum_r n_t,r * pi_{r,s}
    new_counts = np.einsum("br,brs->bs", state.counts, matrices)
    new_counts[:, 0] += chi * alive_before * cycle_length
    return CohortState(new_counts, time_index=state.time_index + 1)


_STATUS_ERRORS = {
    _kernels.DEGENERATE: DegeneratePopulationError,
    _kernels.NEGATIVE: lambda msg: ProbabilityOverflowError(msg),
}


def run(
    init: CohortState,
    params: ParameterSet,
    cfg: MarkovConfig = MarkovConfig(),
    intervention: Intervention = Intervention.STATUS_QUO,
    static: bool = False,
) -> Trajectory:
    """Iterate matrix construction and allocation over the horizon.

    The force of infection is recomputed from current prevalence every
    cycle; ``static=True`` freezes the infection probabilities at their
    initial-prevalence values (the classic static-model comparator).
    """
    p = pack_parameters(params, intervention)
    out = np.empty((cfg.horizon_cycles + 1, 4, 5))
    info = np.empty(1)
    status = _kernels.markov_run(
        init.counts.copy(), p, cfg.horizon_cycles, cfg.cycle_length, static,
        out, info,
    )
    if status == _kernels.OVERFLOW:
        raise ProbabilityOverflowError(
            f"transition probabilities exceed 1 at cycle {int(info[0])}"
        )
    if status == _kernels.DEGENERATE:
        raise DegeneratePopulationError(
            f"mixing undefined at cycle {int(info[0])}"
        )
    times = np.arange(cfg.horizon_cycles + 1) * cfg.cycle_length
    return Trajectory(out, times, intervention=intervention, engine="markov")


def run_batch(
    init: CohortState,
    params_matrix: np.ndarray,
    cfg: MarkovConfig = MarkovConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """One dynamic run per packed parameter row; returns (counts, status)."""
    params_matrix = np.ascontiguousarray(params_matrix, dtype=float)
    n = params_matrix.shape[0]
    out = np.empty((n, cfg.horizon_cycles + 1, 4, 5))
    status = np.zeros(n, dtype=np.int64)
    _kernels.markov_run_batch(
        init.counts.copy(), params_matrix, cfg.horizon_cycles, cfg.cycle_length,
        out, status,
    )
    return out, status
