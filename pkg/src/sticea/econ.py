"""Cost-effectiveness layer: discounted accrual, ICER, CEAC, EVPI.

Consumes either a single deterministic trajectory pair or the per-draw
trajectories of a posterior sample (full probabilistic sensitivity
analysis). Everything is a pure function over the draw collections.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bayes import PosteriorDraws, parameters_from_row
from .model import (
    HealthState,
    Intervention,
    ParameterSet,
    Trajectory,
    UndefinedICERError,
    rate_to_probability,
)

__all__ = ["EconConfig", "CeaResult", "accrue", "icer", "ceac", "evpi",
           "analyse", "analyse_deterministic", "write_cea_tables"]


@dataclass(frozen=True)
class EconConfig:
    """Discounting, willingness-to-pay grid and cost-schedule cadence.

    Screening costs recur every ``screening_interval`` years; the
    vaccination programme accrues every ``vaccination_interval`` years
    (per-cycle by default, matching the engines' continuously applied
    coverage). ``screen_undiagnosed_only`` restricts screening costs to the
    not-yet-diagnosed pool.
    """

    discount_rate: float = 0.03
    wtp_max: float = 50_000.0
    wtp_step: float = 100.0
    wtp_reference: float = 25_000.0
    screening_interval: int = 5
    vaccination_interval: int = 1
    population_multiplier: float = 1_000_000.0
    screen_undiagnosed_only: bool = True

    def __post_init__(self) -> None:
        if self.discount_rate < 0:
            raise ValueError("discount_rate must be >= 0")
        if self.wtp_step <= 0 or self.wtp_max <= 0:
            raise ValueError("willingness-to-pay grid must be increasing")
        if self.screening_interval < 1 or self.vaccination_interval < 1:
            raise ValueError("cost cadences must be >= 1 cycle")

    @property
    def wtp_grid(self) -> np.ndarray:
        return np.arange(0.0, self.wtp_max + self.wtp_step / 2, self.wtp_step)


@dataclass
class CeaResult:
    """Per-draw costs/utilities and the decision summaries built from them."""

    costs: np.ndarray  # (n_draws, 2): status quo, vaccination
    utilities: np.ndarray  # (n_draws, 2)
    icer: float
    wtp_grid: np.ndarray
    ceac: np.ndarray
    evpi_curve_population: np.ndarray  # population EVPI over the grid
    evpi_per_person: float  # at the break-even willingness-to-pay
    evpi_population: float
    cohort_size: float
    config: EconConfig

    @property
    def delta_c(self) -> np.ndarray:
        return self.costs[:, 1] - self.costs[:, 0]

    @property
    def delta_e(self) -> np.ndarray:
        return self.utilities[:, 1] - self.utilities[:, 0]

    def ceac_at(self, k: float) -> float:
        return float(np.mean(k * self.delta_e - self.delta_c > 0.0))

    def evpi_at(self, k: float) -> tuple[float, float]:
        return evpi(self.costs, self.utilities, k,
                    self.config.population_multiplier, self.cohort_size)


def _cycle_probs(params: ParameterSet, engine: str, dt: float) -> tuple[float, ...]:
    """(p23, p34, p45, p15) as per-reporting-interval probabilities."""
    values = (params.trans_2_3, params.trans_3_4, params.trans_4_5,
              params.trans_1_5)
    if engine == "ode":
        return tuple(rate_to_probability(v * dt) for v in values)
    return values


def _accrue_core(
    counts: np.ndarray,
    times: np.ndarray,
    engine: str,
    params: ParameterSet,
    cfg: EconConfig,
    intervention: Intervention,
) -> tuple[float, float]:
    n_times = counts.shape[0]
    disc = (1.0 + cfg.discount_rate) ** (-times)
    util_weights = params.utilities()

    utility = float(np.einsum("t,tbs,s->", disc, counts, util_weights))

    dt = float(times[1] - times[0]) if n_times > 1 else 1.0
    p23, p34, p45, p15 = _cycle_probs(params, engine, dt)

    sus = counts[:, :, 0]
    inf = counts[:, :, 1]
    asym = counts[:, :, 2]
    morbid = counts[:, :, 3]

    cost = float(np.einsum("t,tb->", disc, morbid)) * params.c_dis

    if intervention is Intervention.VACCINATION:
        for i in range(n_times):
            if int(round(times[i])) % cfg.vaccination_interval == 0:
                cost += disc[i] * params.c_vac * params.alpha * sus[i].sum()
            if i > 0:
                # symptomatic presentation on entry to the morbid state
                entrants = morbid[i] - (1.0 - p45 - p15) * morbid[i - 1]
                entrants = np.maximum(entrants, 0.0).sum()
                cost += disc[i] * (params.c_gp + params.c_blood + params.c_treat) * entrants
        return cost, utility

    # status quo: screening rounds with an undiagnosed-pool ledger
    u2 = inf[0].copy()
    u3 = asym[0].copy()
    found = params.sigma * params.eta
    for i in range(n_times):
        if i > 0:
            keep2 = 1.0 - p23 - p15
            inflow = np.maximum(inf[i] - keep2 * inf[i - 1], 0.0)
            u2_new = keep2 * u2 + inflow
            u3_new = (1.0 - p34 - p15) * u3 + p23 * u2
            u2 = np.minimum(u2_new, inf[i])
            u3 = np.minimum(u3_new, asym[i])
        if int(round(times[i])) % cfg.screening_interval == 0:
            undiagnosed = u2 + u3
            pool = sus[i] + undiagnosed if cfg.screen_undiagnosed_only \
                else sus[i] + inf[i] + asym[i]
            cost += disc[i] * params.c_screen * params.sigma * pool.sum()
            cost += disc[i] * (params.c_gp + params.c_test) * params.sigma * undiagnosed.sum()
            newly = found * undiagnosed.sum()
            cost += disc[i] * (params.c_blood + params.c_treat) * newly
            u2 = u2 * (1.0 - found)
            u3 = u3 * (1.0 - found)
    return cost, utility


def accrue(
    trajectory: Trajectory,
    params: ParameterSet,
    cfg: EconConfig = EconConfig(),
    intervention: Optional[Intervention] = None,
) -> tuple[float, float]:
    """Discounted total cost and utility of one trajectory.

    Utilities weight every state's occupancy each cycle; costs follow the
    schedule: disease costs on the morbid state every cycle; under the
    status quo, screening rounds charge the participating undiagnosed pool,
    GP visits and tests for screened infected people, and one-off
    blood-test-plus-treatment for the newly diagnosed; under vaccination,
    the programme covers susceptibles at its cadence and morbid entrants
    present symptomatically. Discounting uses 1/(1+d)^t with t in years
    from the first snapshot.
    """
    if intervention is None:
        intervention = trajectory.intervention
    return _accrue_core(trajectory.counts, trajectory.times, trajectory.engine,
                        params, cfg, intervention)


def icer(delta_c: np.ndarray, delta_e: np.ndarray) -> float:
    """Ratio of means E[delta_c] / E[delta_e] (never a mean of ratios)."""
    de = float(np.mean(delta_e))
    if de == 0.0:
        raise UndefinedICERError("mean incremental effectiveness is zero")
    return float(np.mean(delta_c)) / de


def ceac(delta_c: np.ndarray, delta_e: np.ndarray, wtp_grid: np.ndarray) -> np.ndarray:
    """Probability of positive incremental net benefit along the grid."""
    delta_c = np.asarray(delta_c, dtype=float)
    delta_e = np.asarray(delta_e, dtype=float)
    if delta_c.size < 1:
        raise ValueError("need at least one draw")
    nb = np.asarray(wtp_grid)[:, None] * delta_e[None, :] - delta_c[None, :]
    return (nb > 0.0).mean(axis=1)


def evpi(
    costs: np.ndarray,
    utilities: np.ndarray,
    k: float,
    population_multiplier: float = 1_000_000.0,
    cohort_size: float = 1_000_000.0,
) -> tuple[float, float]:
    """Expected value of perfect information at willingness-to-pay k.

    ``E[max_i NB_i] - max_i E[NB_i]`` over the cohort-scale net benefits,
    reported per person (dividing by the cohort size) and scaled to the
    decision population via ``population_multiplier``.
    """
    costs = np.asarray(costs, dtype=float)
    utilities = np.asarray(utilities, dtype=float)
    if costs.shape[0] < 2:
        raise ValueError("EVPI needs at least two draws")
    nb = k * utilities - costs
    raw = float(np.mean(nb.max(axis=1)) - nb.mean(axis=0).max())
    per_person = raw / cohort_size
    return per_person, per_person * population_multiplier


def _evpi_curve(costs, utilities, grid, multiplier, cohort_size) -> np.ndarray:
    nb = grid[:, None, None] * utilities[None, :, :] - costs[None, :, :]
    raw = nb.max(axis=2).mean(axis=1) - nb.mean(axis=1).max(axis=1)
    return raw / cohort_size * multiplier


def _summarise(costs: np.ndarray, utilities: np.ndarray, cfg: EconConfig,
               cohort_size: float) -> CeaResult:
    dc = costs[:, 1] - costs[:, 0]
    de = utilities[:, 1] - utilities[:, 0]
    point = icer(dc, de)
    grid = cfg.wtp_grid
    curve = ceac(dc, de, grid)
    if costs.shape[0] >= 2:
        evpi_curve = _evpi_curve(costs, utilities, grid,
                                 cfg.population_multiplier, cohort_size)
        # headline value at the break-even willingness-to-pay, where the
        # decision uncertainty (and the value of resolving it) peaks
        per_person, population = evpi(costs, utilities, point,
                                      cfg.population_multiplier, cohort_size)
    else:
        evpi_curve = np.zeros_like(grid)
        per_person = population = 0.0
    return CeaResult(
        costs=costs, utilities=utilities, icer=point, wtp_grid=grid,
        ceac=curve, evpi_curve_population=evpi_curve,
        evpi_per_person=per_person, evpi_population=population,
        cohort_size=cohort_size, config=cfg,
    )


def analyse(draws: PosteriorDraws, cfg: EconConfig = EconConfig()) -> CeaResult:
    """Full probabilistic sensitivity analysis over a posterior sample."""
    n = len(draws)
    costs = np.empty((n, 2))
    utilities = np.empty((n, 2))
    for i in range(n):
        params = parameters_from_row(draws.matrix[i])
        for j, intervention in enumerate(PosteriorDraws.INTERVENTION_AXIS):
            c, u = _accrue_core(draws.trajectories[i, j], draws.times,
                                draws.engine, params, cfg, intervention)
            costs[i, j] = c
            utilities[i, j] = u
    cohort = float(draws.trajectories[0, 0, 0].sum())
    return _summarise(costs, utilities, cfg, cohort)


def analyse_deterministic(
    sq: Trajectory,
    vac: Trajectory,
    params: ParameterSet,
    cfg: EconConfig = EconConfig(),
) -> CeaResult:
    """Point cost-effectiveness of a single deterministic trajectory pair."""
    c1, u1 = accrue(sq, params, cfg, Intervention.STATUS_QUO)
    c2, u2 = accrue(vac, params, cfg, Intervention.VACCINATION)
    return _summarise(np.array([[c1, c2]]), np.array([[u1, u2]]), cfg,
                      float(sq.counts[0].sum()))


def write_cea_tables(result: CeaResult, outdir: str | Path, label: str) -> list[Path]:
    """CSV exports: CE plane points, CEAC curve, EVPI curve + summary."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    path = outdir / f"{label}_ce_plane.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "delta_e", "delta_c"])
        for i, (de, dc) in enumerate(zip(result.delta_e, result.delta_c)):
            writer.writerow([i, repr(float(de)), repr(float(dc))])
    written.append(path)

    path = outdir / f"{label}_ceac.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wtp", "probability_cost_effective"])
        for k, p in zip(result.wtp_grid, result.ceac):
            writer.writerow([repr(float(k)), repr(float(p))])
    written.append(path)

    path = outdir / f"{label}_evpi.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wtp", "population_evpi"])
        for k, v in zip(result.wtp_grid, result.evpi_curve_population):
            writer.writerow([repr(float(k)), repr(float(v))])
    written.append(path)

    path = outdir / f"{label}_cea_summary.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "value"])
        writer.writerow(["icer", repr(result.icer)])
        writer.writerow(["ceac_at_reference", repr(result.ceac_at(result.config.wtp_reference))])
        writer.writerow(["ceac_at_icer", repr(result.ceac_at(result.icer))])
        writer.writerow(["evpi_per_person", repr(result.evpi_per_person)])
        writer.writerow(["evpi_population", repr(result.evpi_population)])
        writer.writerow(["mean_delta_c", repr(float(result.delta_c.mean()))])
        writer.writerow(["mean_delta_e", repr(float(result.delta_e.mean()))])
    written.append(path)
    return written
