import numpy as np
import pytest

from sticea.bayes import reference_parameters
from sticea.markov import MarkovConfig, build_transition_matrix, run, run_batch, step
from sticea.model import (
    STRATA,
    CohortState,
    Intervention,
    ProbabilityOverflowError,
    default_initial_cohort,
    rate_to_probability,
)
from sticea.ode import OdeConfig, integrate, pack_parameters

REF = reference_parameters("markov")
INIT = default_initial_cohort()


def uninfected_state():
    counts = np.zeros((4, 5))
    counts[:, 0] = 1000.0
    return CohortState(counts)


class TestBuildTransitionMatrix:
    def test_zero_prevalence_row(self):
        m = build_transition_matrix(uninfected_state(), REF, STRATA[1])
        assert m[0, 1] == 0.0
        assert m[0, 0] == pytest.approx(1.0 - REF.trans_1_5)

    def test_case_study_infected_row(self):
        m = build_transition_matrix(INIT, REF, STRATA[1])
        np.testing.assert_allclose(
            m[1], [0.0, 1.0 - 0.80 - REF.trans_1_5, 0.80, 0.0, REF.trans_1_5],
            rtol=0, atol=1e-12)

    def test_identity_when_nothing_moves(self):
        params = REF.with_updates(trans_2_3=0.0, trans_3_4=0.0, trans_4_5=0.0,
                                  trans_1_5=0.0)
        m = build_transition_matrix(uninfected_state(), params, STRATA[0])
        np.testing.assert_allclose(m, np.eye(5), rtol=0, atol=0)

    def test_structure_and_row_sums(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            counts = rng.uniform(1, 1e5, (4, 5))
            params = REF.with_updates(
                trans_2_3=rng.uniform(0, 0.9), trans_3_4=rng.uniform(0, 0.9),
                trans_4_5=rng.uniform(0, 0.9), trans_1_5=rng.uniform(0, 0.05),
            )
            for stratum in STRATA:
                m = build_transition_matrix(CohortState(counts), params, stratum,
                                            Intervention.VACCINATION)
                np.testing.assert_allclose(m.sum(axis=1), 1.0, rtol=0, atol=1e-12)
                assert np.all((m >= 0.0) & (m <= 1.0))
                # structural zeros: no backward moves, no skips, dead absorbing
                for r, s in ((0, 2), (0, 3), (1, 0), (1, 3), (2, 0), (2, 1),
                             (3, 0), (3, 1), (3, 2)):
                    assert m[r, s] == 0.0
                np.testing.assert_array_equal(m[4], [0, 0, 0, 0, 1])

    def test_probability_overflow(self):
        params = REF.with_updates(trans_2_3=0.9999, trans_1_5=0.001)
        with pytest.raises(ProbabilityOverflowError):
            build_transition_matrix(INIT, params, STRATA[0])


class TestStep:
    def test_identity_no_births(self):
        matrices = np.broadcast_to(np.eye(5), (4, 5, 5)).copy()
        state = CohortState(np.arange(20, dtype=float).reshape(4, 5))
        out = step(state, matrices, chi=0.0)
        np.testing.assert_array_equal(out.counts, state.counts)
        assert out.time_index == state.time_index + 1

    def test_single_stratum_allocation(self):
        counts = np.zeros((4, 5))
        counts[0, 0] = 100.0
        m = np.broadcast_to(np.eye(5), (4, 5, 5)).copy()
        m[0, 0] = [0.89, 0.10, 0.0, 0.0, 0.01]
        out = step(CohortState(counts), m, chi=0.0)
        np.testing.assert_allclose(out.counts[0], [89.0, 10.0, 0.0, 0.0, 1.0],
                                   rtol=0, atol=1e-12)

    def test_exact_conservation_with_births(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            counts = rng.uniform(0, 1e5, (4, 5))
            state = CohortState(counts)
            matrices = np.empty((4, 5, 5))
            for b in range(4):
                raw = rng.uniform(0, 1, (5, 5))
                matrices[b] = raw / raw.sum(axis=1, keepdims=True)
            chi = rng.uniform(0, 0.05)
            out = step(state, matrices, chi)
            expected = state.total() + chi * state.alive.sum()
            assert out.total() == pytest.approx(expected, rel=1e-13)


class TestRun:
    def test_no_transmission_is_geometric_decay(self):
        params = REF.with_updates(beta=0.0)
        traj = run(INIT, params, MarkovConfig(horizon_cycles=40))
        keep = 1.0 - params.trans_2_3 - params.trans_1_5
        for b in range(4):
            expected = INIT.counts[b, 1] * keep ** np.arange(41)
            np.testing.assert_allclose(traj.counts[:, b, 1], expected, rtol=1e-10)

    def test_single_cycle_equals_one_step(self):
        traj = run(INIT, REF, MarkovConfig(horizon_cycles=1))
        matrices = np.stack([
            build_transition_matrix(INIT, REF, stratum) for stratum in STRATA
        ])
        manual = step(INIT, matrices, REF.chi)
        np.testing.assert_allclose(traj.counts[1], manual.counts, rtol=1e-12)

    def test_exact_conservation_every_cycle(self):
        traj = run(INIT, REF, MarkovConfig(horizon_cycles=100))
        totals = traj.counts.sum(axis=(1, 2))
        alive = traj.alive().sum(axis=1)
        expected = totals[0] + np.concatenate([[0.0], np.cumsum(REF.chi * alive[:-1])])
        np.testing.assert_allclose(totals, expected, rtol=1e-12)

    def test_overflow_reports_cycle(self):
        params = REF.with_updates(trans_2_3=0.9999, trans_1_5=0.001)
        with pytest.raises(ProbabilityOverflowError, match="cycle 0"):
            run(INIT, params, MarkovConfig(horizon_cycles=5))

    def test_static_variant_dominates_dynamic_infections(self):
        cfg = MarkovConfig(horizon_cycles=100)
        dynamic = run(INIT, REF, cfg, Intervention.VACCINATION)
        static = run(INIT, REF, cfg, Intervention.VACCINATION, static=True)
        keep = 1.0 - REF.trans_2_3 - REF.trans_1_5

        def cumulative_inflow(traj):
            inf = traj.counts[:, :, 1].sum(axis=1)
            inflow = inf[1:] - keep * inf[:-1]
            return np.cumsum(inflow)

        cum_dyn = cumulative_inflow(dynamic)
        cum_sta = cumulative_inflow(static)
        assert np.all(cum_sta >= cum_dyn - 1e-9)
        assert cum_sta[-1] > cum_dyn[-1]

    def test_batch_matches_single(self):
        rows = np.stack([
            pack_parameters(REF, Intervention.STATUS_QUO),
            pack_parameters(REF, Intervention.VACCINATION),
        ])
        counts, status = run_batch(INIT, rows, MarkovConfig(horizon_cycles=30))
        assert np.all(status == 0)
        for i, intervention in enumerate((Intervention.STATUS_QUO,
                                          Intervention.VACCINATION)):
            single = run(INIT, REF, MarkovConfig(horizon_cycles=30), intervention)
            np.testing.assert_allclose(counts[i], single.counts, rtol=1e-12)


class TestDiscretizationConsistency:
    def test_monthly_cycles_track_the_ode(self):
        # same rate parameter set for both engines; per-cycle probabilities
        # come from the rate <-> probability transform at kappa = 1/12
        rates = reference_parameters("ode")
        kappa = 1.0 / 12.0
        probs = rates.with_updates(
            trans_2_3=rate_to_probability(rates.trans_2_3 * kappa),
            trans_3_4=rate_to_probability(rates.trans_3_4 * kappa),
            trans_4_5=rate_to_probability(rates.trans_4_5 * kappa),
            trans_1_5=rate_to_probability(rates.trans_1_5 * kappa),
        )
        cfg = MarkovConfig(horizon_cycles=50 * 12, cycle_length=kappa)
        markov_traj = run(INIT, probs, cfg, Intervention.STATUS_QUO)
        ode_traj = integrate(INIT, rates, OdeConfig(horizon=50, solver_step=1 / 365),
                             Intervention.STATUS_QUO).trajectory
        markov_yearly = markov_traj.counts[::12]
        assert markov_yearly.shape[0] == ode_traj.counts.shape[0]
        a = ode_traj.counts[:, :, :4]
        b = markov_yearly[:, :, :4]
        rel = np.abs(b - a) / np.maximum(a, 1.0)
        assert rel.max() < 0.05
