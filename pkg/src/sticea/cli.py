"""Pipeline front end: simulate -> calibrate -> fit -> cost-effectiveness.

One JSON config per experiment, defaults matching the case study, so
``sticea compare`` with no overrides reproduces the headline comparison of
the three models. Every run writes a manifest with the effective config,
stage timings and a hashed inventory of its outputs.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, figures
from .bayes import (
    PARAM_NAMES,
    SERIES_STRATA,
    EvidenceData,
    MCMCConfig,
    PosteriorDraws,
    default_priors,
    sample,
)
from .calibrate import CalibrationRun, calibrate, sampling_distributions, scenario_quantiles
from .datasim import DEFAULT_BINOMIAL_TRIALS, SimRecipe, simulate_evidence
from .econ import EconConfig, analyse, analyse_deterministic, write_cea_tables
from .markov import MarkovConfig, run as markov_run
from .model import (
    STRATA,
    HealthState,
    Intervention,
    Trajectory,
    default_initial_cohort,
)
from .ode import OdeConfig, integrate

__all__ = ["main", "ConfigError", "DataError", "load_config", "DEFAULT_CONFIG"]


class ConfigError(Exception):
    """Malformed or missing configuration (exit code 2)."""


class DataError(Exception):
    """Input CSV does not match the documented schema (exit code 3)."""


DEFAULT_CONFIG = {
    "seed": 57,
    "data": {
        "popsize": 500,
        "noise": True,
        "binomial_trials": dict(DEFAULT_BINOMIAL_TRIALS),
    },
    "mcmc": {"n_chains": 2, "burn_in": 2000, "n_keep": 500},
    "ode": {"horizon": 100.0, "solver_step": 1.0 / 365.0, "report_interval": 1.0},
    "markov": {"horizon_cycles": 100, "cycle_length": 1.0},
    "econ": {
        "discount_rate": 0.03,
        "wtp_max": 50_000.0,
        "wtp_step": 100.0,
        "wtp_reference": 25_000.0,
        "screening_interval": 5,
        "vaccination_interval": 1,
        "population_multiplier": 1_000_000.0,
        "screen_undiagnosed_only": True,
    },
    "calibrate": {"n_samples": 50_000, "method": "mc"},
}


def _merge(defaults, override, path=""):
    if not isinstance(override, dict):
        raise ConfigError(f"config section {path or '<root>'} must be an object")
    merged = dict(defaults)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config field: {here}")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value, here)
        else:
            expected = type(defaults[key])
            if expected in (int, float) and isinstance(value, (int, float)) \
                    and not isinstance(value, bool):
                merged[key] = expected(value)
            elif isinstance(value, expected) and not (
                expected is not bool and isinstance(value, bool)
            ):
                merged[key] = value
            else:
                raise ConfigError(
                    f"config field {here}: expected {expected.__name__}, "
                    f"got {type(value).__name__}"
                )
    return merged


def load_config(path: Optional[str], seed: Optional[int] = None) -> dict:
    """Merge a user config file over the case-study defaults and validate."""
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config {path} is not valid JSON: line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}"
            ) from exc
        config = _merge(config, user)
    if seed is not None:
        config["seed"] = int(seed)
    try:
        _build_configs(config)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _build_configs(config):
    d = config["data"]
    recipe = SimRecipe(seed=config["seed"], popsize=d["popsize"],
                       binomial_trials=dict(d["binomial_trials"]), noise=d["noise"])
    mcmc = MCMCConfig(seed=config["seed"], **config["mcmc"])
    ode_cfg = OdeConfig(**config["ode"])
    markov_cfg = MarkovConfig(**config["markov"])
    e = config["econ"]
    econ_cfg = EconConfig(
        discount_rate=e["discount_rate"], wtp_max=e["wtp_max"],
        wtp_step=e["wtp_step"], wtp_reference=e["wtp_reference"],
        screening_interval=e["screening_interval"],
        vaccination_interval=e["vaccination_interval"],
        population_multiplier=e["population_multiplier"],
        screen_undiagnosed_only=e["screen_undiagnosed_only"],
    )
    if config["calibrate"]["method"] not in ("mc", "lhs"):
        raise ConfigError("calibrate.method must be 'mc' or 'lhs'")
    return recipe, mcmc, ode_cfg, markov_cfg, econ_cfg


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()


# --- CSV schemas --------------------------------------------------------------

_STATE_NAMES = {s: s.name.lower() for s in HealthState}
_STATE_BY_NAME = {v: k for k, v in _STATE_NAMES.items()}


def write_registry_csv(path: Path, partner_counts: dict) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sex", "risk", "subject", "partners"])
        for stratum in STRATA:
            for i, x in enumerate(partner_counts[stratum.label]):
                writer.writerow([stratum.sex.value, stratum.risk.value, i, int(x)])


def write_binomial_csv(path: Path, binomial_counts: dict) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "events", "trials"])
        for name in sorted(binomial_counts):
            r, n = binomial_counts[name]
            writer.writerow([name, int(r), int(n)])


def write_series_csv(path: Path, series: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "sex", "risk", "state", "count"])
        for t in range(series.shape[0]):
            for j, b in enumerate(SERIES_STRATA):
                for s in range(4):
                    writer.writerow([
                        t + 1, STRATA[b].sex.value, STRATA[b].risk.value,
                        _STATE_NAMES[HealthState(s + 1)], repr(float(series[t, j, s])),
                    ])


def _read_rows(path: Path, expected_header: list[str]) -> list[list[str]]:
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != expected_header:
        raise DataError(
            f"{path}: expected header {expected_header}, got {rows[0] if rows else 'empty file'}"
        )
    return rows[1:]


def read_evidence(datadir: Path) -> EvidenceData:
    """Load the three evidence CSVs written by ``simulate``."""
    registry: dict[str, list[int]] = {s.label: [] for s in STRATA}
    for row in _read_rows(datadir / "registry.csv", ["sex", "risk", "subject", "partners"]):
        label = f"{row[0]}_{row[1]}"
        if label not in registry:
            raise DataError(f"registry.csv: unknown stratum {label!r}")
        registry[label].append(int(row[3]))

    binomial = {}
    for row in _read_rows(datadir / "binomial.csv", ["parameter", "events", "trials"]):
        binomial[row[0]] = (int(row[1]), int(row[2]))

    series = np.full((5, 2, 4), np.nan)
    strata_pos = {STRATA[b].label: j for j, b in enumerate(SERIES_STRATA)}
    for row in _read_rows(datadir / "calibration_series.csv",
                          ["year", "sex", "risk", "state", "count"]):
        year = int(row[0])
        label = f"{row[1]}_{row[2]}"
        if not 1 <= year <= 5:
            raise DataError(f"calibration_series.csv: year {year} outside 1-5")
        if label not in strata_pos:
            raise DataError(f"calibration_series.csv: unexpected stratum {label!r}")
        state = _STATE_BY_NAME.get(row[3])
        if state is None or state == HealthState.DEAD:
            raise DataError(f"calibration_series.csv: bad state {row[3]!r}")
        series[year - 1, strata_pos[label], state - 1] = float(row[4])
    if np.isnan(series).any():
        raise DataError("calibration_series.csv: incomplete series (missing cells)")
    try:
        return EvidenceData(
            partner_counts={k: np.array(v) for k, v in registry.items()},
            binomial_counts=binomial,
            calibration_series=series,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def write_trajectory_csv(path: Path, trajectories: list[Trajectory]) -> None:
    """Long-format snapshots: time, intervention, sex, risk, state, count."""
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "engine", "intervention", "sex", "risk", "state", "count"])
        for traj in trajectories:
            for i, t in enumerate(traj.times):
                for b, stratum in enumerate(STRATA):
                    for s in HealthState:
                        writer.writerow([
                            repr(float(t)), traj.engine, traj.intervention.value,
                            stratum.sex.value, stratum.risk.value,
                            _STATE_NAMES[s], repr(float(traj.counts[i, b, s - 1])),
                        ])


def write_draws_csv(path: Path, draws: PosteriorDraws) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", "draw"] + list(draws.names))
        for i in range(len(draws)):
            writer.writerow([int(draws.chain[i]), i]
                            + [repr(float(v)) for v in draws.matrix[i]])


def read_draws_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    rows = _read_rows(path, ["chain", "draw"] + list(PARAM_NAMES))
    if not rows:
        raise DataError(f"{path}: no draws")
    matrix = np.array([[float(v) for v in row[2:]] for row in rows])
    chain = np.array([int(row[0]) for row in rows])
    return matrix, chain


def write_diagnostics_json(path: Path, draws: PosteriorDraws) -> None:
    payload = {
        "engine": draws.engine,
        "seed": draws.seed,
        "n_draws": len(draws),
        "runtime_seconds": draws.runtime_seconds,
        "acceptance": {k: float(v) for k, v in draws.acceptance.items()},
        "rhat": {k: float(v) for k, v in draws.rhat.items()},
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- stages -------------------------------------------------------------------


def _warm_engines(config) -> None:
    """Trigger kernel JIT outside any timed stage."""
    from . import _kernels  # noqa: F401
    recipe, mcmc, ode_cfg, markov_cfg, econ_cfg = _build_configs(config)
    init = default_initial_cohort()
    from .bayes import reference_parameters

    tiny_ode = OdeConfig(horizon=1.0, solver_step=0.5, report_interval=1.0)
    integrate(init, reference_parameters("ode"), tiny_ode)
    markov_run(init, reference_parameters("markov"),
               MarkovConfig(horizon_cycles=1))
    from .markov import run_batch
    from .ode import integrate_batch, pack_parameters

    packed = pack_parameters(reference_parameters("ode"),
                             Intervention.STATUS_QUO)[None]
    integrate_batch(init, packed, tiny_ode)
    run_batch(init, pack_parameters(reference_parameters("markov"),
                                    Intervention.STATUS_QUO)[None],
              MarkovConfig(horizon_cycles=1))


class _Run:
    """Shared context: output directory, stage timing, file inventory."""

    def __init__(self, config: dict, outdir: Path):
        self.config = config
        self.outdir = outdir
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.stage_seconds: dict[str, float] = {}
        self.files: list[Path] = []

    def stage(self, name: str):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.stage_seconds[name] = run.stage_seconds.get(name, 0.0) + (
                    time.perf_counter() - self.t0
                )

        return _Timer()

    def add(self, *paths: Path) -> None:
        self.files.extend(paths)

    def write_manifest(self) -> Path:
        inventory = []
        for path in sorted(set(self.files)):
            data = path.read_bytes()
            inventory.append({
                "path": path.name,
                "bytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            })
        payload = {
            "package_version": __version__,
            "seed": self.config["seed"],
            "config": self.config,
            "config_sha256": config_hash(self.config),
            "stage_seconds": self.stage_seconds,
            "outputs": inventory,
        }
        path = self.outdir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def stage_simulate(run: _Run) -> EvidenceData:
    recipe, *_ = _build_configs(run.config)
    with run.stage("simulate"):
        evidence = simulate_evidence(recipe)
    reg = run.outdir / "registry.csv"
    bino = run.outdir / "binomial.csv"
    ser = run.outdir / "calibration_series.csv"
    write_registry_csv(reg, evidence.partner_counts)
    write_binomial_csv(bino, evidence.binomial_counts)
    write_series_csv(ser, evidence.calibration_series)
    run.add(reg, bino, ser)
    return evidence


def stage_calibrate_dode(run: _Run, evidence: EvidenceData) -> tuple[CalibrationRun, dict]:
    _, _, ode_cfg, _, econ_cfg = _build_configs(run.config)
    cal_cfg = run.config["calibrate"]
    with run.stage("calibrate_dode"):
        dists = sampling_distributions(evidence)
        cal = calibrate(dists, evidence.calibration_series,
                        n_samples=cal_cfg["n_samples"], seed=run.config["seed"],
                        ode_cfg=ode_cfg, method=cal_cfg["method"])

    samples_path = run.outdir / "dode_samples.csv"
    with samples_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample"] + list(cal.names) + ["score"])
        for i in range(cal.samples.shape[0]):
            writer.writerow([i] + [repr(float(v)) for v in cal.samples[i]]
                            + [repr(float(cal.scores[i]))])

    best_path = run.outdir / "dode_best.csv"
    with best_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "point_estimate"])
        for name, value in zip(cal.names, cal.samples[cal.best_index]):
            writer.writerow([name, repr(float(value))])
        writer.writerow(["score", repr(cal.best_score)])

    with run.stage("dode_cea"):
        init = default_initial_cohort()
        best = cal.best_set
        sq = integrate(init, best, ode_cfg, Intervention.STATUS_QUO).trajectory
        vac = integrate(init, best, ode_cfg, Intervention.VACCINATION).trajectory
        point = analyse_deterministic(sq, vac, best, econ_cfg)
        scenarios = scenario_quantiles(cal, init=init, ode_cfg=ode_cfg,
                                       econ_cfg=econ_cfg)

    traj_path = run.outdir / "dode_trajectory.csv"
    write_trajectory_csv(traj_path, [sq, vac])

    scen_path = run.outdir / "dode_scenarios.csv"
    with scen_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantile", "icer", "delta_c", "delta_e"])
        writer.writerow(["point", repr(point.icer),
                         repr(float(point.delta_c[0])), repr(float(point.delta_e[0]))])
        for q, res in sorted(scenarios.items()):
            writer.writerow([repr(q), repr(res.icer),
                             repr(float(res.delta_c[0])), repr(float(res.delta_e[0]))])
    run.add(samples_path, best_path, traj_path, scen_path)
    return cal, {"point": point, "scenarios": scenarios,
                 "trajectories": (sq, vac)}


_ENGINE_BY_MODEL = {"bmm": "markov", "bode": "ode"}


def stage_fit(run: _Run, evidence: EvidenceData, model: str) -> PosteriorDraws:
    engine = _ENGINE_BY_MODEL[model]
    _, mcmc, ode_cfg, markov_cfg, _ = _build_configs(run.config)
    with run.stage(f"fit_{model}"):
        draws = sample(mcmc, evidence, engine, ode_cfg=ode_cfg,
                       markov_cfg=markov_cfg)
    draws_path = run.outdir / f"{model}_draws.csv"
    write_draws_csv(draws_path, draws)
    diag_path = run.outdir / f"{model}_diagnostics.json"
    write_diagnostics_json(diag_path, draws)

    mean_sq = draws.mean_trajectory(Intervention.STATUS_QUO)
    mean_vac = draws.mean_trajectory(Intervention.VACCINATION)
    traj_path = run.outdir / f"{model}_trajectory.csv"
    write_trajectory_csv(traj_path, [
        Trajectory(mean_sq, draws.times, Intervention.STATUS_QUO, engine),
        Trajectory(mean_vac, draws.times, Intervention.VACCINATION, engine),
    ])
    run.add(draws_path, diag_path, traj_path)
    return draws


def stage_cea(run: _Run, draws: PosteriorDraws, model: str):
    _, _, _, _, econ_cfg = _build_configs(run.config)
    with run.stage(f"cea_{model}"):
        result = analyse(draws, econ_cfg)
    run.add(*write_cea_tables(result, run.outdir, model))
    run.add(
        figures.scatter_chart(
            run.outdir / f"{model}_ce_plane.svg",
            result.delta_e, result.delta_c,
            title=f"Cost-effectiveness plane ({model})",
            xlabel="incremental effectiveness (QALYs)",
            ylabel="incremental cost (GBP)",
            rays=[(econ_cfg.wtp_reference, f"k = {econ_cfg.wtp_reference:g}")],
            markers=[(float(np.mean(result.delta_e)), float(np.mean(result.delta_c)),
                      f"ICER = {result.icer:,.0f}")],
        ),
        figures.line_chart(
            run.outdir / f"{model}_ceac.svg",
            [(result.wtp_grid, result.ceac, model)],
            title="Cost-effectiveness acceptability curve",
            xlabel="willingness to pay (GBP/QALY)", ylabel="Pr(cost-effective)",
        ),
        figures.line_chart(
            run.outdir / f"{model}_evpi.svg",
            [(result.wtp_grid, result.evpi_curve_population, model)],
            title="Population expected value of perfect information",
            xlabel="willingness to pay (GBP/QALY)", ylabel="population EVPI (GBP)",
        ),
    )
    return result


def _comparison_outputs(run: _Run, dode_bundle, bmm, bode, cea_bmm, cea_bode):
    sq_dode, _ = dode_bundle["trajectories"]
    mean_bmm = bmm.mean_trajectory(Intervention.STATUS_QUO)
    mean_bode = bode.mean_trajectory(Intervention.STATUS_QUO)

    comp_path = run.outdir / "trajectory_comparison.csv"
    with comp_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "sex", "risk", "state", "dode", "bode", "bmm"])
        fh_idx = 1  # high-risk females, the headline stratum
        for i, t in enumerate(sq_dode.times):
            for s in range(4):
                writer.writerow([
                    repr(float(t)), "female", "high",
                    _STATE_NAMES[HealthState(s + 1)],
                    repr(float(sq_dode.counts[i, fh_idx, s])),
                    repr(float(mean_bode[i, fh_idx, s])),
                    repr(float(mean_bmm[i, fh_idx, s])),
                ])
    run.add(comp_path)

    times = sq_dode.times
    for s in range(4):
        name = _STATE_NAMES[HealthState(s + 1)]
        run.add(figures.line_chart(
            run.outdir / f"trajectories_{name}.svg",
            [
                (times, sq_dode.counts[:, 1, s], "dODE (best fit)"),
                (times, mean_bode[:, 1, s], "BODE (posterior mean)"),
                (times, mean_bmm[:, 1, s], "BMM (posterior mean)"),
            ],
            title=f"High-risk females, {name} (status quo)",
            xlabel="years", ylabel="persons",
        ))

    icer_path = run.outdir / "icer_table.csv"
    point = dode_bundle["point"]
    scen = dode_bundle["scenarios"]
    with icer_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "icer", "mean_delta_c", "mean_delta_e",
                         "ceac_at_icer", "evpi_population"])
        writer.writerow(["dode", repr(point.icer),
                         repr(float(point.delta_c.mean())),
                         repr(float(point.delta_e.mean())), "", ""])
        for q, res in sorted(scen.items()):
            writer.writerow([f"dode_q{q}", repr(res.icer),
                             repr(float(res.delta_c.mean())),
                             repr(float(res.delta_e.mean())), "", ""])
        for model, res in (("bode", cea_bode), ("bmm", cea_bmm)):
            writer.writerow([model, repr(res.icer),
                             repr(float(res.delta_c.mean())),
                             repr(float(res.delta_e.mean())),
                             repr(res.ceac_at(res.icer)),
                             repr(res.evpi_population)])
    run.add(icer_path)

    run.add(figures.line_chart(
        run.outdir / "ceac.svg",
        [(cea_bode.wtp_grid, cea_bode.ceac, "BODE"),
         (cea_bmm.wtp_grid, cea_bmm.ceac, "BMM")],
        title="Cost-effectiveness acceptability curves",
        xlabel="willingness to pay (GBP/QALY)", ylabel="Pr(cost-effective)",
    ))
    run.add(figures.line_chart(
        run.outdir / "evpi.svg",
        [(cea_bode.wtp_grid, cea_bode.evpi_curve_population, "BODE"),
         (cea_bmm.wtp_grid, cea_bmm.evpi_curve_population, "BMM")],
        title="Population EVPI",
        xlabel="willingness to pay (GBP/QALY)", ylabel="population EVPI (GBP)",
    ))

    runtime_path = run.outdir / "runtime.json"
    ratio = (bode.runtime_seconds / bmm.runtime_seconds
             if bmm.runtime_seconds > 0 else float("inf"))
    runtime_path.write_text(json.dumps({
        "bmm_seconds": bmm.runtime_seconds,
        "bode_seconds": bode.runtime_seconds,
        "bode_over_bmm": ratio,
        "stage_seconds": run.stage_seconds,
    }, indent=2, sort_keys=True) + "\n")
    run.add(runtime_path)


# --- commands -----------------------------------------------------------------


def _common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (defaults: case study)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int,
                        help="cap engine thread count (numba threads)")


def _setup(args) -> _Run:
    config = load_config(args.config, args.seed)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        import numba

        numba.set_num_threads(args.workers)
    return _Run(config, Path(args.out))


def _evidence_for(args, run: _Run) -> EvidenceData:
    datadir = Path(getattr(args, "data", None) or args.out)
    required = ["registry.csv", "binomial.csv", "calibration_series.csv"]
    if all((datadir / f).exists() for f in required):
        return read_evidence(datadir)
    if getattr(args, "data", None):
        missing = [f for f in required if not (datadir / f).exists()]
        raise DataError(f"missing evidence files in {datadir}: {missing}")
    return stage_simulate(run)


def cmd_simulate(args) -> int:
    run = _setup(args)
    stage_simulate(run)
    run.write_manifest()
    return 0


def cmd_calibrate_dode(args) -> int:
    run = _setup(args)
    _warm_engines(run.config)
    evidence = _evidence_for(args, run)
    cal, bundle = stage_calibrate_dode(run, evidence)
    run.write_manifest()
    print(f"dODE best score {cal.best_score:.4g}, "
          f"point ICER {bundle['point'].icer:,.2f}")
    return 0


def cmd_fit(args, model: str) -> int:
    run = _setup(args)
    _warm_engines(run.config)
    evidence = _evidence_for(args, run)
    draws = stage_fit(run, evidence, model)
    result = stage_cea(run, draws, model)
    run.write_manifest()
    worst = max(draws.rhat.values()) if draws.rhat else float("nan")
    print(f"{model}: {len(draws)} draws, worst R-hat {worst:.3f}, "
          f"ICER {result.icer:,.2f}")
    return 0


def cmd_cea(args) -> int:
    run = _setup(args)
    _warm_engines(run.config)
    model = args.model
    engine = _ENGINE_BY_MODEL[model]
    matrix, chain = read_draws_csv(Path(args.draws))
    _, mcmc, ode_cfg, markov_cfg, econ_cfg = _build_configs(run.config)
    from .bayes import _posterior_trajectories

    with run.stage("trajectories"):
        trajectories, times = _posterior_trajectories(
            matrix, engine, default_initial_cohort(), ode_cfg, markov_cfg)
    draws = PosteriorDraws(
        names=PARAM_NAMES, matrix=matrix, chain=chain,
        trajectories=trajectories, times=times, acceptance={}, rhat={},
        engine=engine, seed=run.config["seed"],
    )
    result = stage_cea(run, draws, model)
    run.write_manifest()
    print(f"{model}: ICER {result.icer:,.2f}, "
          f"CEAC@k* {result.ceac_at(result.icer):.3f}, "
          f"population EVPI {result.evpi_population:,.0f}")
    return 0


def cmd_compare(args) -> int:
    run = _setup(args)
    _warm_engines(run.config)
    evidence = _evidence_for(args, run)
    cal, dode_bundle = stage_calibrate_dode(run, evidence)
    bode = stage_fit(run, evidence, "bode")
    bmm = stage_fit(run, evidence, "bmm")
    cea_bode = stage_cea(run, bode, "bode")
    cea_bmm = stage_cea(run, bmm, "bmm")
    _comparison_outputs(run, dode_bundle, bmm, bode, cea_bmm, cea_bode)
    run.write_manifest()
    ratio = bode.runtime_seconds / bmm.runtime_seconds
    print(f"ICERs: dODE {dode_bundle['point'].icer:,.2f}  "
          f"BODE {cea_bode.icer:,.2f}  BMM {cea_bmm.icer:,.2f}")
    print(f"runtime: BODE {bode.runtime_seconds:.1f}s / "
          f"BMM {bmm.runtime_seconds:.1f}s = {ratio:.1f}x")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sticea",
        description="Compartmental STI models with calibration and CEA",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate the synthetic evidence base")
    _common_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate-dode",
                       help="frequentist Monte Carlo calibration + scenario CEA")
    _common_args(p)
    p.add_argument("--data", help="directory holding the evidence CSVs")
    p.set_defaults(func=cmd_calibrate_dode)

    for model, blurb in (("bode", "Bayesian ODE system"),
                         ("bmm", "dynamic Bayesian Markov model")):
        p = sub.add_parser(f"fit-{model}", help=f"fit the {blurb}")
        _common_args(p)
        p.add_argument("--data", help="directory holding the evidence CSVs")
        p.set_defaults(func=lambda a, m=model: cmd_fit(a, m))

    p = sub.add_parser("cea", help="cost-effectiveness analysis from stored draws")
    _common_args(p)
    p.add_argument("--draws", required=True, help="draws CSV from a fit stage")
    p.add_argument("--engine", dest="model", choices=["bmm", "bode"],
                   required=True, help="engine the draws came from")
    p.set_defaults(func=cmd_cea)

    p = sub.add_parser("compare",
                       help="run all three models on shared data and compare")
    _common_args(p)
    p.add_argument("--data", help="directory holding the evidence CSVs")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # numeric / model failures
        print(f"error in {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
