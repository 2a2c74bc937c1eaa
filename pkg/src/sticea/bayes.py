"""Bayesian machinery: priors, conjugate updates, one-step calibration, MCMC.

The joint model couples three evidence blocks:

* a partner-count registry (Poisson-Gamma) informing the contact rates,
* binomial experiments informing the probability parameters,
* a five-year time series of high-risk compartment counts, tied to either
  engine's output through Poisson observation models (one-step calibration).

Parameters whose full conditional is available in closed form are drawn
exactly each sweep; the ten natural-history parameters entering the
trajectory likelihood are updated by component-wise adaptive random-walk
Metropolis on transformed scales.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import _kernels
from .model import (
    STRATA,
    CohortState,
    Intervention,
    ParameterSet,
    UndefinedDiagnosticError,
    default_initial_cohort,
)
from .markov import MarkovConfig, run_batch as markov_run_batch
from .ode import OdeConfig, integrate_batch as ode_integrate_batch

__all__ = [
    "PriorSpec",
    "EvidenceData",
    "MCMCConfig",
    "PosteriorDraws",
    "NonConvergenceWarning",
    "default_priors",
    "reference_parameters",
    "conjugate_posterior_gamma",
    "conjugate_posterior_beta",
    "calibration_loglik",
    "log_posterior",
    "sample",
    "gelman_rubin",
    "CALIBRATED_NAMES",
    "CONJUGATE_NAMES",
    "COST_NAMES",
    "UTILITY_NAMES",
    "PARAM_NAMES",
]


class NonConvergenceWarning(UserWarning):
    """Raised (as a warning) when any split-R-hat is >= 1.1 after sampling."""


@dataclass(frozen=True)
class PriorSpec:
    """Distribution family, hyperparameters and sampling role of a parameter.

    role: 'calibrated' parameters are random-walk updated against the full
    posterior; 'conjugate' ones are drawn exactly from their closed-form
    posterior each sweep; 'fixed' ones carry no data and are drawn from the
    prior.
    """

    name: str
    family: str  # 'gamma' | 'beta' | 'lognormal'
    a: float  # shape / alpha / log-mean
    b: float  # rate / beta / log-sd
    role: str = "fixed"

    def __post_init__(self) -> None:
        if self.family not in ("gamma", "beta", "lognormal"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "lognormal":
            if self.b <= 0:
                raise ValueError("lognormal sd must be > 0")
        elif self.a <= 0 or self.b <= 0:
            raise ValueError(f"{self.name}: hyperparameters must be > 0")
        if self.role not in ("fixed", "conjugate", "calibrated"):
            raise ValueError(f"unknown role {self.role!r}")

    def _dist(self):
        if self.family == "gamma":
            return stats.gamma(self.a, scale=1.0 / self.b)
        if self.family == "beta":
            return stats.beta(self.a, self.b)
        return stats.lognorm(self.b, scale=math.exp(self.a))

    def mean(self) -> float:
        return float(self._dist().mean())

    def interval(self, level: float = 0.95) -> tuple[float, float]:
        lo, hi = self._dist().interval(level)
        return float(lo), float(hi)

    def logpdf(self, x: float) -> float:
        return float(self._dist().logpdf(x))

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        if self.family == "gamma":
            return rng.gamma(self.a, 1.0 / self.b, size)
        if self.family == "beta":
            return rng.beta(self.a, self.b, size)
        return rng.lognormal(self.a, self.b, size)


def conjugate_posterior_gamma(prior: PriorSpec, counts) -> PriorSpec:
    """Exact Poisson-Gamma update: Gamma(a + sum(x), b + n)."""
    if prior.family != "gamma":
        raise ValueError("conjugate_posterior_gamma needs a gamma prior")
    counts = np.asarray(counts)
    if counts.size and (counts < 0).any():
        raise ValueError("counts must be nonnegative")
    return PriorSpec(prior.name, "gamma",
                     prior.a + float(counts.sum()), prior.b + counts.size,
                     role=prior.role)


def conjugate_posterior_beta(prior: PriorSpec, r: int, n: int) -> PriorSpec:
    """Exact Beta-Binomial update: Beta(a + r, b + n - r)."""
    if prior.family != "beta":
        raise ValueError("conjugate_posterior_beta needs a beta prior")
    if not 0 <= r <= n:
        raise ValueError(f"need 0 <= r <= n, got r={r}, n={n}")
    return PriorSpec(prior.name, "beta", prior.a + r, prior.b + (n - r),
                     role=prior.role)


# --- parameter inventory ---------------------------------------------------

CALIBRATED_NAMES = (
    "omega_fl", "omega_fh", "omega_ml", "omega_mh",
    "chi", "trans_2_3", "trans_3_4", "trans_4_5", "trans_1_5", "beta",
)
CONJUGATE_NAMES = ("eta", "sigma", "alpha", "gamma")
COST_NAMES = ("c_screen", "c_vac", "c_test", "c_blood", "c_treat", "c_dis", "c_gp")
UTILITY_NAMES = ("u_infected", "u_asymptomatic", "u_morbid")
PARAM_NAMES = CALIBRATED_NAMES + CONJUGATE_NAMES + COST_NAMES + UTILITY_NAMES

_OMEGA_KEYS = ("omega_fl", "omega_fh", "omega_ml", "omega_mh")

#: Reference values used to generate the case-study evidence.
REFERENCE_MEANS = {
    "omega_fl": 1.96, "omega_fh": 9.00, "omega_ml": 2.98, "omega_mh": 9.10,
    "beta": 0.16, "eta": 0.90, "sigma": 0.90, "alpha": 0.90, "gamma": 0.90,
}

_COST_HYPERS = {
    "c_screen": (2.996, 0.693),
    "c_vac": (5.518352, 0.07986607),
    "c_test": (2.996, 0.03),
    "c_blood": (3.401, 0.03),
    "c_treat": (4.258597, 0.8325546),
    "c_dis": (6.194998, 0.1980422),
    "c_gp": (3.912, 0.02),
}

_UTILITY_HYPERS = {
    "u_infected": (1469.3, 629.7),
    "u_asymptomatic": (1439.4, 959.6),
    "u_morbid": (629.7, 1469.3),
}

# Natural-history priors: per-cycle probabilities (Beta) for the discrete
# engine, per-year rates (Gamma) for the continuous one. Means agree.
_NAT_HIST_HYPERS = {
    "markov": {
        "chi": ("beta", 1099.99, 108899.0),
        "trans_2_3": ("beta", 5119.2, 1279.8),
        "trans_3_4": ("beta", 1842.66, 18631.34),
        "trans_4_5": ("beta", 1535.96, 36863.04),
        "trans_1_5": ("beta", 156.171, 312186.6),
    },
    "ode": {
        "chi": ("gamma", 1111.1, 111111.1),
        "trans_2_3": ("gamma", 25600.0, 32000.0),
        "trans_3_4": ("gamma", 2025.0, 22500.0),
        "trans_4_5": ("gamma", 1600.0, 40000.0),
        "trans_1_5": ("gamma", 156.25, 312500.0),
    },
}


def default_priors(engine: str = "markov") -> dict[str, PriorSpec]:
    """The case-study prior set for the given engine ('markov' or 'ode')."""
    if engine not in _NAT_HIST_HYPERS:
        raise ValueError(f"engine must be 'markov' or 'ode', got {engine!r}")
    priors: dict[str, PriorSpec] = {}
    for name in _OMEGA_KEYS:
        priors[name] = PriorSpec(name, "gamma", 0.1, 0.1, role="calibrated")
    for name, (family, a, b) in _NAT_HIST_HYPERS[engine].items():
        priors[name] = PriorSpec(name, family, a, b, role="calibrated")
    priors["beta"] = PriorSpec("beta", "beta", 0.5, 0.5, role="calibrated")
    for name in CONJUGATE_NAMES:
        priors[name] = PriorSpec(name, "beta", 0.5, 0.5, role="conjugate")
    for name, (mu, sd) in _COST_HYPERS.items():
        priors[name] = PriorSpec(name, "lognormal", mu, sd, role="fixed")
    for name, (a, b) in _UTILITY_HYPERS.items():
        priors[name] = PriorSpec(name, "beta", a, b, role="fixed")
    return priors


def _params_from_mapping(values: Mapping[str, float]) -> ParameterSet:
    return ParameterSet(
        omega=tuple(values[k] for k in _OMEGA_KEYS),
        chi=values["chi"], beta=values["beta"],
        trans_2_3=values["trans_2_3"], trans_3_4=values["trans_3_4"],
        trans_4_5=values["trans_4_5"], trans_1_5=values["trans_1_5"],
        eta=values["eta"], sigma=values["sigma"],
        alpha=values["alpha"], gamma=values["gamma"],
        **{k: values[k] for k in COST_NAMES},
        **{k: values[k] for k in UTILITY_NAMES},
    )


def reference_parameters(engine: str = "ode") -> ParameterSet:
    """Case-study reference ParameterSet (prior/posterior means)."""
    priors = default_priors(engine)
    values = {name: spec.mean() for name, spec in priors.items()}
    values.update(REFERENCE_MEANS)
    return _params_from_mapping(values)


def parameters_from_row(row: np.ndarray) -> ParameterSet:
    """Build a ParameterSet from one draw row in PARAM_NAMES order."""
    return _params_from_mapping(dict(zip(PARAM_NAMES, row)))


# --- evidence ----------------------------------------------------------------

#: Calibration series axes: (year 1..5, [female-high, male-high], state S/I/A/M)
SERIES_STRATA = (1, 3)
SERIES_SHAPE = (5, 2, 4)


@dataclass(frozen=True)
class EvidenceData:
    """Simulated evidence base: registry, binomial experiments, time series."""

    partner_counts: dict  # stratum label -> int array (popsize,)
    binomial_counts: dict  # parameter name -> (events, trials)
    calibration_series: np.ndarray  # (5, 2, 4), see SERIES_STRATA

    def __post_init__(self) -> None:
        series = np.asarray(self.calibration_series, dtype=float)
        if series.shape != SERIES_SHAPE:
            raise ValueError(
                f"calibration series must cover exactly years 1-5 for both "
                f"high-risk strata and 4 states: shape {SERIES_SHAPE}, got "
                f"{series.shape}"
            )
        if (series < 0).any():
            raise ValueError("calibration counts must be nonnegative")
        for name, (r, n) in self.binomial_counts.items():
            if not 0 <= r <= n:
                raise ValueError(f"binomial evidence {name}: need 0 <= r <= n")
        for label, counts in self.partner_counts.items():
            if (np.asarray(counts) < 0).any():
                raise ValueError(f"registry counts for {label} must be >= 0")
        object.__setattr__(self, "calibration_series", series)

    def registry_for(self, omega_name: str) -> np.ndarray:
        idx = _OMEGA_KEYS.index(omega_name)
        return np.asarray(self.partner_counts[STRATA[idx].label])


# --- likelihood --------------------------------------------------------------

#: Floor applied to the Poisson mean for model counts after the first year;
#: only binds when a compartment is numerically empty.
POISSON_FLOOR = 0.1


def _poisson_logpmf(y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return y * np.log(mu) - mu - gammaln(y + 1.0)


def _series_counts(traj_counts: np.ndarray) -> np.ndarray:
    """(5, 2, 4) model counts for the calibration window from (>=5, 4, 5)."""
    return traj_counts[:5][:, SERIES_STRATA, :4]


def _series_loglik(model_counts: np.ndarray, series: np.ndarray) -> float:
    mu = model_counts.copy()
    mu[1:] = np.maximum(mu[1:], POISSON_FLOOR)  # years 2-5 carry the floor
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = _poisson_logpmf(series, mu)
    # a zero model count with a zero observation is an exact fit
    terms = np.where((mu == 0.0) & (series == 0.0), 0.0, terms)
    if np.isnan(terms).any():
        return -np.inf
    return float(terms.sum())


class _LikelihoodEngine:
    """Runs the designated engine over the calibration window for one theta."""

    def __init__(self, engine: str, init: CohortState,
                 ode_cfg: Optional[OdeConfig] = None):
        if engine not in ("markov", "ode"):
            raise ValueError(f"engine must be 'markov' or 'ode', got {engine!r}")
        self.engine = engine
        self.init = init.counts.copy()
        self.n_years = SERIES_SHAPE[0] - 1  # series year t maps to index t-1
        if engine == "ode":
            cfg = ode_cfg or OdeConfig()
            self.steps_per_year = cfg.steps_per_report
            self.h = cfg.effective_step
        self._out = np.empty((self.n_years + 1, 4, 5))
        self._info = np.empty(1)

    def window_counts(self, p: np.ndarray) -> Optional[np.ndarray]:
        """Model counts over years 1-5 under the status quo; None on failure."""
        if self.engine == "markov":
            status = _kernels.markov_run(
                self.init, p, self.n_years, 1.0, False, self._out, self._info
            )
        else:
            status = _kernels.ode_integrate(
                self.init, p, self.n_years, self.steps_per_year, self.h,
                self._out, np.zeros(2),
            )
        if status != _kernels.OK:
            return None
        return self._out


def _pack_status_quo(values: Mapping[str, float]) -> np.ndarray:
    return np.array([
        values["omega_fl"], values["omega_fh"], values["omega_ml"],
        values["omega_mh"], values["chi"], values["trans_2_3"],
        values["trans_3_4"], values["trans_4_5"], values["trans_1_5"],
        values["beta"], 1.0, 0.0,
    ])


def calibration_loglik(
    theta: ParameterSet | Mapping[str, float],
    data: EvidenceData,
    engine: str = "markov",
    init: Optional[CohortState] = None,
    ode_cfg: Optional[OdeConfig] = None,
) -> float:
    """Poisson log likelihood of the five-year series given theta."""
    values = _theta_values(theta)
    like = _LikelihoodEngine(engine, init or default_initial_cohort(), ode_cfg)
    counts = like.window_counts(_pack_status_quo(values))
    if counts is None:
        return -np.inf
    return _series_loglik(_series_counts(counts), data.calibration_series)


def _theta_values(theta: ParameterSet | Mapping[str, float]) -> dict[str, float]:
    if isinstance(theta, ParameterSet):
        values = {name: getattr(theta, name) for name in PARAM_NAMES
                  if name not in _OMEGA_KEYS}
        for key, w in zip(_OMEGA_KEYS, theta.omega):
            values[key] = w
        return values
    return dict(theta)


def log_posterior(
    theta: ParameterSet | Mapping[str, float],
    data: EvidenceData,
    engine: str = "markov",
    priors: Optional[dict[str, PriorSpec]] = None,
    init: Optional[CohortState] = None,
    ode_cfg: Optional[OdeConfig] = None,
) -> float:
    """Joint log posterior density of the calibrated parameter block.

    Sums the calibrated parameters' log priors, the registry and binomial
    log likelihoods, and the trajectory calibration term from the designated
    engine. Returns -inf (rather than raising) for out-of-support theta.
    """
    values = _theta_values(theta)
    priors = priors or default_priors(engine)

    lp = 0.0
    for name in CALIBRATED_NAMES:
        x = values[name]
        spec = priors[name]
        if x <= 0 or (spec.family == "beta" and x >= 1):
            return -np.inf
        contrib = spec.logpdf(x)
        if not np.isfinite(contrib):
            return -np.inf
        lp += contrib

    for name in _OMEGA_KEYS:
        counts = data.registry_for(name)
        w = values[name]
        lp += float(np.sum(counts * math.log(w) - w - gammaln(counts + 1.0)))

    r, n = data.binomial_counts["beta"]
    b = values["beta"]
    lp += (gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)
           + r * math.log(b) + (n - r) * math.log1p(-b))

    lp += calibration_loglik(values, data, engine, init, ode_cfg)
    return lp


# --- MCMC --------------------------------------------------------------------


@dataclass(frozen=True)
class MCMCConfig:
    """Sampler budget and reproducibility knobs.

    The total draw budget is n_chains * n_keep, stored unthinned after
    burn-in. Proposal scales adapt only during burn-in, nudged toward the
    20-40% acceptance window. A given seed makes runs bit-reproducible.
    """

    n_chains: int = 2
    burn_in: int = 2000
    n_keep: int = 500
    seed: int = 57
    initial_scale: float = 0.05
    adapt_interval: int = 50
    target_acceptance: float = 0.3
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_chains < 1 or self.n_keep < 1 or self.burn_in < 0:
            raise ValueError("need n_chains >= 1, n_keep >= 1, burn_in >= 0")


@dataclass
class PosteriorDraws:
    """MCMC output: one row per kept draw plus derived trajectories."""

    names: tuple
    matrix: np.ndarray  # (n_draws, len(names))
    chain: np.ndarray  # (n_draws,)
    trajectories: np.ndarray  # (n_draws, 2, T+1, 4, 5); axis 1 = SQ, VAC
    times: np.ndarray  # (T+1,)
    acceptance: dict
    rhat: dict
    engine: str
    seed: int
    runtime_seconds: float = 0.0

    INTERVENTION_AXIS = (Intervention.STATUS_QUO, Intervention.VACCINATION)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def parameter(self, name: str) -> np.ndarray:
        return self.matrix[:, self.names.index(name)]

    def parameter_set(self, draw: int) -> ParameterSet:
        return parameters_from_row(self.matrix[draw])

    def posterior_means(self) -> dict[str, float]:
        return dict(zip(self.names, self.matrix.mean(axis=0)))

    def mean_trajectory(self, intervention: Intervention) -> np.ndarray:
        i = self.INTERVENTION_AXIS.index(intervention)
        return self.trajectories[:, i].mean(axis=0)


class _TransformedPosterior:
    """Fast evaluation of the calibrated block's log posterior.

    Works on the transformed scale (log for gamma-priored parameters, logit
    for beta-priored ones) with the change-of-variables term folded in, so
    the random walk never leaves the support. Likelihood constants are
    dropped; only differences matter inside the sampler.
    """

    def __init__(self, priors, data: Optional[EvidenceData], engine: str,
                 init: CohortState, prior_only: bool,
                 ode_cfg: Optional[OdeConfig]):
        self.priors = [priors[name] for name in CALIBRATED_NAMES]
        self.logit = [spec.family == "beta" for spec in self.priors]
        self.a = np.array([spec.a for spec in self.priors])
        self.b = np.array([spec.b for spec in self.priors])
        self.engine = _LikelihoodEngine(engine, init, ode_cfg)
        self.prior_only = prior_only or data is None
        if not self.prior_only:
            self.series = data.calibration_series
            self.reg_sum = np.array([float(data.registry_for(k).sum())
                                     for k in _OMEGA_KEYS])
            self.reg_n = np.array([float(data.registry_for(k).size)
                                   for k in _OMEGA_KEYS])
            self.beta_r, self.beta_n = data.binomial_counts["beta"]
        self._p = np.empty(_kernels.P_LEN)
        self._p[10] = 1.0  # status quo coverage
        self._p[11] = 0.0

    def to_natural(self, z: np.ndarray) -> np.ndarray:
        x = np.empty_like(z)
        for i, logit in enumerate(self.logit):
            x[i] = 1.0 / (1.0 + math.exp(-z[i])) if logit else math.exp(z[i])
        return x

    def to_transformed(self, x: np.ndarray) -> np.ndarray:
        z = np.empty_like(x)
        for i, logit in enumerate(self.logit):
            z[i] = math.log(x[i] / (1.0 - x[i])) if logit else math.log(x[i])
        return z

    def __call__(self, z: np.ndarray) -> float:
        x = self.to_natural(z)
        lp = 0.0
        # prior + log-Jacobian, constants dropped
        for i in range(len(x)):
            if self.logit[i]:
                lp += self.a[i] * math.log(x[i]) + self.b[i] * math.log1p(-x[i])
            else:
                lp += self.a[i] * z[i] - self.b[i] * x[i]
        if self.prior_only:
            return lp
        for i in range(4):  # omega registry, Poisson
            lp += self.reg_sum[i] * z[i] - self.reg_n[i] * x[i]
        beta = x[9]
        lp += self.beta_r * math.log(beta) + (self.beta_n - self.beta_r) * math.log1p(-beta)
        self._p[:10] = x
        counts = self.engine.window_counts(self._p)
        if counts is None:
            return -np.inf
        lp += _series_loglik(_series_counts(counts), self.series)
        return lp


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain,)))


def _run_chain(
    chain: int,
    cfg: MCMCConfig,
    posterior: _TransformedPosterior,
    conj_posteriors: dict[str, PriorSpec],
    fixed_priors: dict[str, PriorSpec],
    start: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One chain; returns (kept draws (n_keep, P), acceptance rates (10,))."""
    rng = _chain_rng(cfg.seed, chain)
    ncal = len(CALIBRATED_NAMES)
    z = posterior.to_transformed(start.copy())
    z += 0.1 * cfg.initial_scale * rng.standard_normal(ncal)  # overdispersed start
    lp = posterior(z)
    scales = np.full(ncal, cfg.initial_scale)
    accepted = np.zeros(ncal)
    attempted = np.zeros(ncal)
    acc_total = np.zeros(ncal)
    att_total = np.zeros(ncal)

    n_sweeps = cfg.burn_in + cfg.n_keep
    kept = np.empty((cfg.n_keep, len(PARAM_NAMES)))
    conj_specs = [conj_posteriors[name] for name in CONJUGATE_NAMES]
    fixed_specs = [fixed_priors[name] for name in COST_NAMES + UTILITY_NAMES]

    for sweep in range(n_sweeps):
        for j in range(ncal):
            zj = z[j]
            z[j] = zj + scales[j] * rng.standard_normal()
            lp_new = posterior(z)
            attempted[j] += 1
            att_total[j] += 1
            if math.log(rng.random()) < lp_new - lp:
                lp = lp_new
                accepted[j] += 1
                acc_total[j] += 1
            else:
                z[j] = zj
        in_burn = sweep < cfg.burn_in
        if in_burn and (sweep + 1) % cfg.adapt_interval == 0:
            rates = accepted / np.maximum(attempted, 1.0)
            scales *= np.exp(rates - cfg.target_acceptance)
            np.clip(scales, 1e-4, 10.0, out=scales)
            accepted[:] = 0.0
            attempted[:] = 0.0
        if not in_burn:
            row = kept[sweep - cfg.burn_in]
            row[:ncal] = posterior.to_natural(z)
            for k, spec in enumerate(conj_specs):
                row[ncal + k] = spec.sample(rng)
            for k, spec in enumerate(fixed_specs):
                row[ncal + 4 + k] = spec.sample(rng)
    return kept, acc_total / np.maximum(att_total, 1.0)


def _start_point(priors, data: Optional[EvidenceData], prior_only: bool) -> np.ndarray:
    start = np.empty(len(CALIBRATED_NAMES))
    for i, name in enumerate(CALIBRATED_NAMES):
        spec = priors[name]
        if not prior_only and data is not None:
            if name in _OMEGA_KEYS:
                spec = conjugate_posterior_gamma(spec, data.registry_for(name))
            elif name == "beta":
                r, n = data.binomial_counts["beta"]
                spec = conjugate_posterior_beta(spec, r, n)
        mean = spec.mean()
        if spec.family == "beta":
            mean = min(max(mean, 1e-6), 1 - 1e-6)
        start[i] = max(mean, 1e-6)
    return start


def _posterior_trajectories(
    matrix: np.ndarray, engine: str, init: CohortState,
    ode_cfg: OdeConfig, markov_cfg: MarkovConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-horizon per-draw trajectories for both interventions."""
    n = matrix.shape[0]
    cols = {name: i for i, name in enumerate(PARAM_NAMES)}
    packed = np.empty((n, _kernels.P_LEN))
    packed[:, :10] = matrix[:, :10]
    results = []
    for intervention in PosteriorDraws.INTERVENTION_AXIS:
        if intervention is Intervention.VACCINATION:
            packed[:, 10] = matrix[:, cols["alpha"]]
            packed[:, 11] = matrix[:, cols["gamma"]]
        else:
            packed[:, 10] = 1.0
            packed[:, 11] = 0.0
        if engine == "markov":
            counts, status = markov_run_batch(init, packed, markov_cfg)
            times = np.arange(markov_cfg.horizon_cycles + 1) * markov_cfg.cycle_length
        else:
            counts, status = ode_integrate_batch(init, packed, ode_cfg)
            times = np.arange(ode_cfg.n_reports + 1) * ode_cfg.report_interval
        if (status != 0).any():
            bad = int(np.flatnonzero(status)[0])
            raise RuntimeError(
                f"trajectory generation failed for draw {bad} "
                f"(status {int(status[bad])})"
            )
        results.append(counts)
    return np.stack(results, axis=1), times


def sample(
    cfg: MCMCConfig,
    data: Optional[EvidenceData],
    engine: str = "markov",
    priors: Optional[dict[str, PriorSpec]] = None,
    init: Optional[CohortState] = None,
    prior_only: bool = False,
    ode_cfg: Optional[OdeConfig] = None,
    markov_cfg: Optional[MarkovConfig] = None,
    likelihood_ode_cfg: Optional[OdeConfig] = None,
) -> PosteriorDraws:
    """Run the MCMC and return kept draws plus per-draw trajectories.

    Conjugate-flagged parameters are drawn exactly from their closed-form
    posteriors each sweep; fixed-prior parameters from their priors; the ten
    calibrated parameters move by component-wise adaptive random-walk
    Metropolis against the full log posterior.
    """
    t0 = time.perf_counter()
    priors = priors or default_priors(engine)
    init = init or default_initial_cohort()
    ode_cfg = ode_cfg or OdeConfig()
    markov_cfg = markov_cfg or MarkovConfig()
    like_ode_cfg = likelihood_ode_cfg or OdeConfig(
        horizon=float(SERIES_SHAPE[0] - 1),
        solver_step=ode_cfg.solver_step,
        report_interval=1.0,
    )
    if data is None:
        prior_only = True

    conj_posteriors = {}
    for name in CONJUGATE_NAMES:
        spec = priors[name]
        if not prior_only and name in data.binomial_counts:
            r, n = data.binomial_counts[name]
            spec = conjugate_posterior_beta(spec, r, n)
        conj_posteriors[name] = spec
    fixed_priors = {name: priors[name] for name in COST_NAMES + UTILITY_NAMES}

    posterior = _TransformedPosterior(priors, data, engine, init, prior_only,
                                      like_ode_cfg)
    start = _start_point(priors, data, prior_only)

    chains: list[np.ndarray] = []
    acc_rates = []
    for chain in range(cfg.n_chains):
        kept, acc = _run_chain(chain, cfg, posterior, conj_posteriors,
                               fixed_priors, start)
        chains.append(kept)
        acc_rates.append(acc)

    matrix = np.concatenate(chains, axis=0)
    chain_id = np.repeat(np.arange(cfg.n_chains), cfg.n_keep)
    acceptance = dict(zip(CALIBRATED_NAMES, np.mean(acc_rates, axis=0)))

    rhat = {}
    if cfg.n_chains >= 2 and cfg.n_keep >= 10:
        for i, name in enumerate(PARAM_NAMES):
            per_chain = np.stack([c[:, i] for c in chains])
            try:
                rhat[name] = gelman_rubin(per_chain)
            except UndefinedDiagnosticError:
                rhat[name] = np.nan
        worst = np.nanmax(list(rhat.values()))
        if worst >= 1.1:
            offenders = [k for k, v in rhat.items() if v >= 1.1]
            warnings.warn(
                f"split R-hat >= 1.1 for {offenders} (worst {worst:.3f}); "
                "increase the budget",
                NonConvergenceWarning,
            )

    trajectories, times = _posterior_trajectories(matrix, engine, init,
                                                  ode_cfg, markov_cfg)
    return PosteriorDraws(
        names=PARAM_NAMES, matrix=matrix, chain=chain_id,
        trajectories=trajectories, times=times, acceptance=acceptance,
        rhat=rhat, engine=engine, seed=cfg.seed,
        runtime_seconds=time.perf_counter() - t0,
    )


def gelman_rubin(chains: np.ndarray) -> float:
    """Split potential scale reduction over (n_chains, n_draws) series."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2:
        raise ValueError("need a (n_chains >= 2, n_draws) array")
    n = chains.shape[1]
    if n < 10:
        raise ValueError("need at least 10 draws per chain")
    half = n // 2
    segments = np.concatenate([chains[:, :half], chains[:, half: 2 * half]])
    m, length = segments.shape
    within = segments.var(axis=1, ddof=1)
    w = within.mean()
    if w == 0.0:
        raise UndefinedDiagnosticError("zero within-chain variance")
    means = segments.mean(axis=1)
    b = length * means.var(ddof=1)
    v = (length - 1) / length * w + b / length
    return float(np.sqrt(v / w))
