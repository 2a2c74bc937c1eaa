"""Continuous-time engine: classical RK4 over the stratified ODE system.

Fixed-step integration keeps runs bit-reproducible and makes step-halving a
built-in error check; the system is non-stiff over the supported parameter
ranges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (
    CohortState,
    DegeneratePopulationError,
    Intervention,
    NegativeStateError,
    ParameterSet,
    Trajectory,
    effective_coverage,
    force_of_infection,
)

__all__ = ["OdeConfig", "OdeSolution", "derivatives", "integrate", "integrate_batch",
           "pack_parameters"]


@dataclass(frozen=True)
class OdeConfig:
    """Integration horizon and resolution, all in years."""

    horizon: float = 100.0
    solver_step: float = 1.0 / 365.0
    report_interval: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.solver_step <= self.report_interval <= self.horizon:
            raise ValueError(
                "need 0 < solver_step <= report_interval <= horizon, got "
                f"{self.solver_step}, {self.report_interval}, {self.horizon}"
            )

    @property
    def n_reports(self) -> int:
        return int(round(self.horizon / self.report_interval))

    @property
    def steps_per_report(self) -> int:
        n = int(round(self.report_interval / self.solver_step))
        return max(n, 1)

    @property
    def effective_step(self) -> float:
        """Actual step used: divides the report interval exactly, so the
        recorded times are honest even when solver_step does not."""
        return self.report_interval / self.steps_per_report


@dataclass(frozen=True)
class OdeSolution:
    trajectory: Trajectory
    n_steps: int
    max_local_error: float  # step-doubling estimate, persons


def pack_parameters(params: ParameterSet, intervention: Intervention) -> np.ndarray:
    """Flatten a ParameterSet into the kernels' 12-slot vector."""
    cov, eff = effective_coverage(params, intervention)
    return np.array([
        params.omega[0], params.omega[1], params.omega[2], params.omega[3],
        params.chi, params.trans_2_3, params.trans_3_4, params.trans_4_5,
        params.trans_1_5, params.beta, cov, eff,
    ])


def derivatives(
    state: CohortState, params: ParameterSet, intervention: Intervention
) -> np.ndarray:
    """Rates of change (persons/year) per (stratum, state).

    Births enter each stratum's susceptible pool at ``chi * alive``; the
    all-cause death rate applies to every alive state and the morbid state
    carries additional excess mortality. The row sums therefore equal the
    per-stratum birth inflow exactly. An empty partner pool contributes
    zero prevalence, so an all-zero cohort is a fixed point.
    """
    from .model import STRATA, OPPOSITE_SEX, SEX_INDICES

    cov, eff = effective_coverage(params, intervention)
    out = np.zeros_like(state.counts)
    alive = state.alive
    psi_bar = {}
    for sex, (lo, hi) in SEX_INDICES.items():
        den = params.omega[hi] * alive[hi] + params.omega[lo] * alive[lo]
        if den == 0.0:
            psi_bar[sex] = 0.0
            continue
        g_high = params.omega[hi] * alive[hi] / den
        psi = 0.0
        for idx, g in ((hi, g_high), (lo, 1.0 - g_high)):
            if g > 0.0:
                psi += g * state.infected[idx] / alive[idx]
        psi_bar[sex] = psi

    for b, stratum in enumerate(STRATA):
        psi = psi_bar[OPPOSITE_SEX[stratum.sex]]
        lam = force_of_infection(params.beta, params.omega[b], psi, cov, eff)
        n1, n2, n3, n4 = state.counts[b, :4]
        alive = n1 + n2 + n3 + n4
        r23, r34, r45, r15 = (params.trans_2_3, params.trans_3_4,
                              params.trans_4_5, params.trans_1_5)
        out[b, 0] = params.chi * alive - (lam + r15) * n1
        out[b, 1] = lam * n1 - (r23 + r15) * n2
        out[b, 2] = r23 * n2 - (r34 + r15) * n3
        out[b, 3] = r34 * n3 - (r45 + r15) * n4
        out[b, 4] = r15 * alive + r45 * n4
    return out


_STATUS_ERRORS = {
    _kernels.DEGENERATE: DegeneratePopulationError,
    _kernels.NEGATIVE: NegativeStateError,
}


def integrate(
    init: CohortState,
    params: ParameterSet,
    cfg: OdeConfig = OdeConfig(),
    intervention: Intervention = Intervention.STATUS_QUO,
) -> OdeSolution:
    """Integrate the ODE system and report snapshots at each report interval."""
    p = pack_parameters(params, intervention)
    n_rep = cfg.n_reports
    out = np.empty((n_rep + 1, 4, 5))
    diag = np.zeros(2)
    status = _kernels.ode_integrate(
        init.counts.copy(), p, n_rep, cfg.steps_per_report, cfg.effective_step, out, diag
    )
    if status != _kernels.OK:
        raise _STATUS_ERRORS[status](f"ODE integration failed (status {status})")
    times = np.arange(n_rep + 1) * cfg.report_interval
    traj = Trajectory(out, times, intervention=intervention, engine="ode")
    return OdeSolution(traj, n_steps=int(diag[0]), max_local_error=float(diag[1]))


def integrate_batch(
    init: CohortState,
    params_matrix: np.ndarray,
    cfg: OdeConfig = OdeConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate one trajectory per packed parameter row.

    Returns (counts, status) with counts of shape
    (n, n_reports + 1, 4, 5); rows with nonzero status hold no usable data.
    """
    params_matrix = np.ascontiguousarray(params_matrix, dtype=float)
    n = params_matrix.shape[0]
    n_rep = cfg.n_reports
    out = np.empty((n, n_rep + 1, 4, 5))
    status = np.zeros(n, dtype=np.int64)
    _kernels.ode_integrate_batch(
        init.counts.copy(), params_matrix, n_rep, cfg.steps_per_report,
        cfg.effective_step, out, status,
    )
    return out, status
