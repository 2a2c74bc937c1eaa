"""Compartmental STI models with Bayesian calibration and cost-effectiveness.

Three routes to the same decision problem: a deterministic ODE system with
frequentist Monte Carlo calibration, a Bayesian ODE system, and a dynamic
Bayesian Markov model whose force of infection is recomputed inside the
state-allocation recursion. A shared economics layer turns any of their
outputs into ICER / CEAC / EVPI summaries.
"""
from .model import (
    HealthState,
    Sex,
    Risk,
    Stratum,
    STRATA,
    Intervention,
    ParameterSet,
    CohortState,
    Trajectory,
    MixingContext,
    DegeneratePopulationError,
    NegativeStateError,
    ProbabilityOverflowError,
    UndefinedICERError,
    UndefinedDiagnosticError,
    mixing_probabilities,
    weighted_prevalence,
    force_of_infection,
    rate_to_probability,
    probability_to_rate,
    default_initial_cohort,
)
from .ode import OdeConfig, OdeSolution, derivatives, integrate, integrate_batch
from .markov import MarkovConfig, build_transition_matrix, step, run, run_batch
from .bayes import (
    PriorSpec,
    EvidenceData,
    MCMCConfig,
    PosteriorDraws,
    NonConvergenceWarning,
    default_priors,
    reference_parameters,
    conjugate_posterior_gamma,
    conjugate_posterior_beta,
    calibration_loglik,
    log_posterior,
    sample,
    gelman_rubin,
)
from .calibrate import CalibrationRun, score, calibrate, scenario_quantiles, sampling_distributions
from .datasim import SimRecipe, simulate_evidence, simulate_registry, simulate_calibration_series
from .econ import EconConfig, CeaResult, accrue, icer, ceac, evpi, analyse, analyse_deterministic

__version__ = "0.1.0"
