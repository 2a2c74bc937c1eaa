import numpy as np
import pytest
from scipy.integrate import simpson

from sticea.bayes import reference_parameters
from sticea.model import CohortState, Intervention, default_initial_cohort
from sticea.ode import OdeConfig, derivatives, integrate, integrate_batch, pack_parameters

REF = reference_parameters("ode")
INIT = default_initial_cohort()

# frequentist best-fit point estimates of the case study
BEST_FIT = REF.with_updates(
    omega=(1.6085, 8.3836, 2.4526, 8.3515), chi=0.0100, beta=0.1639,
    trans_2_3=0.7957, trans_3_4=0.0891, trans_4_5=0.0232, trans_1_5=0.0005,
)


class TestDerivatives:
    def test_all_zero_state_is_fixed_point(self):
        d = derivatives(CohortState(np.zeros((4, 5))), REF, Intervention.STATUS_QUO)
        assert np.all(d == 0.0)

    def test_no_transmission_without_prevalence(self):
        counts = np.zeros((4, 5))
        counts[:, 0] = [1000.0, 500.0, 1000.0, 500.0]
        d = derivatives(CohortState(counts), REF, Intervention.STATUS_QUO)
        assert np.all(d[:, 1] == 0.0)  # no infections
        expected = REF.chi * counts[:, 0] - REF.trans_1_5 * counts[:, 0]
        np.testing.assert_allclose(d[:, 0], expected, rtol=1e-12)

    def test_single_stratum_growth(self):
        counts = np.zeros((4, 5))
        counts[0, 0] = 1000.0
        params = REF.with_updates(chi=0.01, trans_1_5=0.0005)
        d = derivatives(CohortState(counts), params, Intervention.STATUS_QUO)
        assert d[0, 0] == pytest.approx(9.5, abs=1e-12)

    def test_row_sums_equal_births(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            counts = rng.uniform(0, 1e5, (4, 5))
            state = CohortState(counts)
            d = derivatives(state, REF, Intervention.VACCINATION)
            np.testing.assert_allclose(d.sum(axis=1), REF.chi * state.alive,
                                       rtol=1e-12)


class TestIntegrate:
    def test_frozen_dynamics(self):
        params = REF.with_updates(chi=0.0, beta=0.0, trans_2_3=0.0,
                                  trans_3_4=0.0, trans_4_5=0.0, trans_1_5=0.0)
        sol = integrate(INIT, params, OdeConfig(horizon=10, solver_step=1 / 73))
        for snap in sol.trajectory.counts:
            np.testing.assert_allclose(snap, INIT.counts, rtol=0, atol=1e-9)

    def test_no_transmission_decays_infected(self):
        params = REF.with_updates(beta=0.0)
        sol = integrate(INIT, params, OdeConfig(horizon=30, solver_step=1 / 73))
        infected = sol.trajectory.counts[:, :, 1].sum(axis=1)
        assert np.all(np.diff(infected) < 0)

    def test_case_study_epidemic_shape(self):
        # high-risk female infections rise, then decline toward an endemic level
        sol = integrate(INIT, BEST_FIT, OdeConfig(solver_step=1 / 73))
        series = sol.trajectory.series(1, 2)  # FH, INFECTED
        peak = int(np.argmax(series))
        assert 5 < peak < 95
        assert series[peak] > 3 * series[0]
        assert series[-1] < 0.9 * series[peak]
        assert series[-1] > 0.0

    def test_conservation_against_quadrature(self):
        # monthly reports give the quadrature enough resolution
        cfg = OdeConfig(horizon=50, solver_step=1 / 365, report_interval=1 / 12)
        sol = integrate(INIT, REF, cfg, Intervention.STATUS_QUO)
        traj = sol.trajectory
        alive = traj.alive().sum(axis=1)
        births = REF.chi * simpson(alive, x=traj.times)
        gained = traj.counts[-1].sum() - traj.counts[0].sum()
        assert gained == pytest.approx(births, rel=1e-6)

    def test_step_halving_stability(self):
        base = integrate(INIT, REF, OdeConfig(horizon=100, solver_step=1 / 365))
        half = integrate(INIT, REF, OdeConfig(horizon=100, solver_step=1 / 730))
        a, b = base.trajectory.counts, half.trajectory.counts
        rel = np.abs(a - b) / np.maximum(np.abs(b), 1e-9)
        assert rel.max() < 1e-4

    def test_perfect_vaccine_blocks_all_infection(self):
        params = REF.with_updates(alpha=1.0, gamma=1.0)
        sol = integrate(INIT, params, OdeConfig(horizon=50, solver_step=1 / 73),
                        Intervention.VACCINATION)
        infected = sol.trajectory.counts[:, :, 1]
        # pure decay of the initial infections: inflow is exactly zero
        keep = np.exp(-(params.trans_2_3 + params.trans_1_5) * sol.trajectory.times)
        for b in range(4):
            np.testing.assert_allclose(infected[:, b], INIT.counts[b, 1] * keep,
                                       rtol=1e-6)

    def test_diagnostics_populated(self):
        sol = integrate(INIT, REF, OdeConfig(horizon=5))
        assert sol.n_steps == 5 * 365
        assert 0.0 <= sol.max_local_error < 1e-6

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            OdeConfig(horizon=10, solver_step=2.0, report_interval=1.0)


class TestIntegrateBatch:
    def test_matches_single_runs(self):
        rows = np.stack([
            pack_parameters(REF, Intervention.STATUS_QUO),
            pack_parameters(REF, Intervention.VACCINATION),
            pack_parameters(BEST_FIT, Intervention.STATUS_QUO),
        ])
        cfg = OdeConfig(horizon=20, solver_step=1 / 73)
        counts, status = integrate_batch(INIT, rows, cfg)
        assert np.all(status == 0)
        singles = [
            integrate(INIT, REF, cfg, Intervention.STATUS_QUO),
            integrate(INIT, REF, cfg, Intervention.VACCINATION),
            integrate(INIT, BEST_FIT, cfg, Intervention.STATUS_QUO),
        ]
        for i, sol in enumerate(singles):
            np.testing.assert_allclose(counts[i], sol.trajectory.counts,
                                       rtol=1e-12, atol=1e-9)
