"""Shared domain model for the chronic-STI compartmental engines.

Five health states, four sex/risk strata, two competing interventions.
Everything here is a pure function over immutable values; the two engines
(continuous-time ODE, discrete-time Markov) build on the mixing and
force-of-infection primitives defined in this module.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "HealthState",
    "Sex",
    "Risk",
    "Stratum",
    "STRATA",
    "Intervention",
    "ParameterSet",
    "CohortState",
    "Trajectory",
    "MixingContext",
    "DegeneratePopulationError",
    "NegativeStateError",
    "ProbabilityOverflowError",
    "UndefinedICERError",
    "UndefinedDiagnosticError",
    "mixing_probabilities",
    "weighted_prevalence",
    "force_of_infection",
    "effective_coverage",
    "rate_to_probability",
    "probability_to_rate",
    "cycle_probability",
    "default_initial_cohort",
]


class HealthState(enum.IntEnum):
    """Disease progression states; DEAD is absorbing in every engine."""

    SUSCEPTIBLE = 1
    INFECTED = 2
    ASYMPTOMATIC = 3
    MORBID = 4
    DEAD = 5


N_STATES = len(HealthState)

#: Indices of the four alive states within a counts row.
ALIVE_SLICE = slice(0, 4)


class Sex(enum.Enum):
    FEMALE = "female"
    MALE = "male"


class Risk(enum.Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class Stratum:
    sex: Sex
    risk: Risk

    @property
    def label(self) -> str:
        return f"{self.sex.value}_{self.risk.value}"


#: Canonical stratum order used for all (4, 5) count arrays.
STRATA: tuple[Stratum, ...] = (
    Stratum(Sex.FEMALE, Risk.LOW),
    Stratum(Sex.FEMALE, Risk.HIGH),
    Stratum(Sex.MALE, Risk.LOW),
    Stratum(Sex.MALE, Risk.HIGH),
)

N_STRATA = len(STRATA)

#: Stratum indices grouped by sex, in (low, high) order.
SEX_INDICES = {Sex.FEMALE: (0, 1), Sex.MALE: (2, 3)}

OPPOSITE_SEX = {Sex.FEMALE: Sex.MALE, Sex.MALE: Sex.FEMALE}


class Intervention(enum.Enum):
    """The two competing strategies, run from identical initial conditions."""

    STATUS_QUO = "status_quo"
    VACCINATION = "vaccination"


class DegeneratePopulationError(ValueError):
    """Mixing is undefined because a contributing population is empty."""


class NegativeStateError(ValueError):
    """A compartment count fell materially below zero during integration."""


class ProbabilityOverflowError(ValueError):
    """A transition-matrix row's exit mass exceeds 1 (cycle too long)."""


class UndefinedICERError(ZeroDivisionError):
    """ICER requested with zero mean incremental effectiveness."""


class UndefinedDiagnosticError(ValueError):
    """Convergence diagnostic undefined (zero within-chain variance)."""


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value!r}")


def _check_nonneg(name: str, value: float) -> None:
    if value < 0.0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class ParameterSet:
    """One full set of epidemiological, intervention, cost and utility values.

    ``trans_*`` entries are per-cycle probabilities when driving the Markov
    engine and per-year rates when driving the ODE engines; both conventions
    share the same field names. Utilities anchor at u_susceptible = 1 (full
    health) and u_dead = 0.
    """

    # partner acquisition rates per stratum, canonical STRATA order (per year)
    omega: tuple[float, float, float, float]
    chi: float  # proliferation rate (births per alive person-year)
    beta: float  # transmission probability per partnership
    trans_2_3: float  # infected -> asymptomatic
    trans_3_4: float  # asymptomatic -> morbid
    trans_4_5: float  # morbid -> dead (excess mortality)
    trans_1_5: float  # all-cause death, applied to every alive state
    eta: float  # probability an STI test yields a diagnosis
    sigma: float  # screening participation probability
    alpha: float  # vaccine coverage
    gamma: float  # vaccine efficacy
    c_screen: float
    c_vac: float
    c_test: float
    c_blood: float
    c_treat: float
    c_dis: float
    c_gp: float
    u_infected: float
    u_asymptomatic: float
    u_morbid: float
    u_susceptible: float = 1.0
    u_dead: float = 0.0

    def __post_init__(self) -> None:
        for i, w in enumerate(self.omega):
            _check_nonneg(f"omega[{STRATA[i].label}]", w)
        _check_nonneg("chi", self.chi)
        for name in ("beta", "eta", "sigma", "alpha", "gamma",
                     "u_infected", "u_asymptomatic", "u_morbid",
                     "u_susceptible", "u_dead"):
            _check_unit(name, getattr(self, name))
        for name in ("trans_2_3", "trans_3_4", "trans_4_5", "trans_1_5"):
            _check_nonneg(name, getattr(self, name))
        for name in ("c_screen", "c_vac", "c_test", "c_blood", "c_treat",
                     "c_dis", "c_gp"):
            _check_nonneg(name, getattr(self, name))

    def utilities(self) -> np.ndarray:
        """QALY weights per health state, in HealthState order."""
        return np.array([self.u_susceptible, self.u_infected,
                         self.u_asymptomatic, self.u_morbid, self.u_dead])

    def with_updates(self, **kwargs) -> "ParameterSet":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class CohortState:
    """Counts of people per (stratum, health state) at one time index.

    Counts are continuous nonnegative reals (expected cohort occupancy),
    stored as a (4, 5) array in STRATA x HealthState order.
    """

    counts: np.ndarray
    time_index: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts, dtype=float)
        if arr.shape != (N_STRATA, N_STATES):
            raise ValueError(f"counts must have shape (4, 5), got {arr.shape}")
        if (arr < 0).any():
            raise NegativeStateError("cohort counts must be nonnegative")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def alive(self) -> np.ndarray:
        """Alive persons per stratum (states 1-4)."""
        return self.counts[:, ALIVE_SLICE].sum(axis=1)

    @property
    def infected(self) -> np.ndarray:
        """Infectious persons per stratum (state INFECTED only)."""
        return self.counts[:, HealthState.INFECTED - 1]

    def total(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True)
class Trajectory:
    """Yearly (or per-cycle) snapshots of a cohort under one intervention."""

    counts: np.ndarray  # (n_times, 4, 5)
    times: np.ndarray  # (n_times,) in years from start
    intervention: Intervention
    engine: str

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=float)
        times = np.asarray(self.times, dtype=float)
        if counts.ndim != 3 or counts.shape[1:] != (N_STRATA, N_STATES):
            raise ValueError(f"counts must be (T, 4, 5), got {counts.shape}")
        if times.shape != (counts.shape[0],):
            raise ValueError("times length must match counts")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return self.counts.shape[0]

    def state(self, i: int) -> CohortState:
        return CohortState(self.counts[i].copy(), time_index=int(round(self.times[i])))

    def series(self, stratum: int, state: HealthState) -> np.ndarray:
        return self.counts[:, stratum, state - 1]

    def alive(self) -> np.ndarray:
        """Alive persons per stratum over time, shape (T, 4)."""
        return self.counts[:, :, ALIVE_SLICE].sum(axis=2)


@dataclass(frozen=True)
class MixingContext:
    """Partner-choice probabilities and prevalence seen by each sex."""

    g_high: dict  # Sex -> probability the partner is high-risk
    psi_bar: dict  # Sex -> weighted prevalence among partners of that sex


def mixing_probabilities(omega: Sequence[float], alive: Sequence[float]) -> dict:
    """Probability that a randomly selected partner of each sex is high-risk.

    Partner choice is proportional to partner-acquisition activity, so the
    probability of drawing a high-risk partner of sex v' is
    ``w_H N_H / (w_H N_H + w_L N_L)`` over that sex's two risk groups.

    Parameters
    ----------
    omega, alive:
        Per-stratum partner acquisition rates and alive counts, in the
        canonical STRATA order.

    Returns
    -------
    dict mapping Sex -> g_high for partners of that sex.
    """
    omega = np.asarray(omega, dtype=float)
    alive = np.asarray(alive, dtype=float)
    out = {}
    for sex, (lo, hi) in SEX_INDICES.items():
        num = omega[hi] * alive[hi]
        den = num + omega[lo] * alive[lo]
        if den == 0.0:
            raise DegeneratePopulationError(
                f"no partner-acquisition activity among {sex.value}s"
            )
        out[sex] = num / den
    return out


def weighted_prevalence(
    omega: Sequence[float],
    infected: Sequence[float],
    alive: Sequence[float],
) -> MixingContext:
    """Activity-weighted STI prevalence among partners of each sex.

    ``psi_bar(v') = g_high I_H/N_H + g_low I_L/N_L`` over the risk groups of
    sex v'. Only the INFECTED state contributes to infectiousness. A risk
    group with zero alive members is admissible only when its selection
    probability is also zero.
    """
    infected = np.asarray(infected, dtype=float)
    alive = np.asarray(alive, dtype=float)
    g_high = mixing_probabilities(omega, alive)
    psi = {}
    for sex, (lo, hi) in SEX_INDICES.items():
        gh = g_high[sex]
        total = 0.0
        for idx, g in ((hi, gh), (lo, 1.0 - gh)):
            if g == 0.0:
                continue
            if alive[idx] == 0.0:
                raise DegeneratePopulationError(
                    f"stratum {STRATA[idx].label} empty but selected with g={g}"
                )
            total += g * infected[idx] / alive[idx]
        psi[sex] = total
    return MixingContext(g_high=g_high, psi_bar=psi)


def effective_coverage(params: ParameterSet, intervention: Intervention) -> tuple[float, float]:
    """(coverage, efficacy) pair entering the force of infection.

    The status quo behaves as full coverage with a zero-efficacy product,
    which collapses the adjusted force of infection to the unvaccinated one.
    """
    if intervention is Intervention.VACCINATION:
        return params.alpha, params.gamma
    return 1.0, 0.0


def force_of_infection(
    beta: float,
    omega_vb: float,
    psi_bar_opposite: float,
    coverage: float = 1.0,
    efficacy: float = 0.0,
) -> float:
    """Per-susceptible infection rate (1/year) for one stratum.

    ``lambda = cov (1 - eff) beta omega psi + (1 - cov) beta omega psi``;
    the vaccinated fraction of the susceptible pool sees transmission scaled
    by (1 - efficacy), the rest is unprotected.
    """
    _check_unit("beta", beta)
    _check_unit("coverage", coverage)
    _check_unit("efficacy", efficacy)
    _check_nonneg("omega_vb", omega_vb)
    _check_nonneg("psi_bar_opposite", psi_bar_opposite)
    base = beta * omega_vb * psi_bar_opposite
    return coverage * (1.0 - efficacy) * base + (1.0 - coverage) * base


def rate_to_probability(rate: float) -> float:
    """Probability of at least one event in one cycle at constant hazard."""
    _check_nonneg("rate", rate)
    return -np.expm1(-rate)


def probability_to_rate(probability: float) -> float:
    """Inverse of rate_to_probability (per-cycle hazard from probability)."""
    _check_unit("probability", probability)
    if probability == 1.0:
        raise ValueError("probability 1 corresponds to an infinite rate")
    return -np.log1p(-probability)


def cycle_probability(rate: float, cycle_length: float) -> float:
    """Per-cycle transition probability from a yearly rate."""
    return rate_to_probability(rate * cycle_length)


def default_initial_cohort() -> CohortState:
    """Case-study initial cohort: 1,000,000 people, 600 infected.

    Per sex: 400,000 low-risk (240 infected) and 100,000 high-risk
    (60 infected); everyone else susceptible.
    """
    counts = np.zeros((N_STRATA, N_STATES))
    for sex in Sex:
        lo, hi = SEX_INDICES[sex]
        counts[lo, 0], counts[lo, 1] = 399_760.0, 240.0
        counts[hi, 0], counts[hi, 1] = 99_940.0, 60.0
    return CohortState(counts, time_index=0)
