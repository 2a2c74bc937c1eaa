import numpy as np
import pytest

from sticea.model import (
    STRATA,
    CohortState,
    DegeneratePopulationError,
    HealthState,
    NegativeStateError,
    ParameterSet,
    Sex,
    default_initial_cohort,
    force_of_infection,
    mixing_probabilities,
    probability_to_rate,
    rate_to_probability,
    weighted_prevalence,
)


def make_params(**overrides):
    from sticea.bayes import reference_parameters

    return reference_parameters("ode").with_updates(**overrides)


class TestMixingProbabilities:
    def test_activity_weighted_selection(self):
        # males: omega_H=9, N_H=200000 vs omega_L=3, N_L=800000
        omega = [1.0, 1.0, 3.0, 9.0]
        alive = [1.0, 1.0, 800_000.0, 200_000.0]
        g = mixing_probabilities(omega, alive)
        assert g[Sex.MALE] == pytest.approx(3.0 / 7.0, abs=1e-12)

    def test_symmetry(self):
        g = mixing_probabilities([2, 2, 5, 5], [100, 100, 300, 300])
        assert g[Sex.FEMALE] == 0.5
        assert g[Sex.MALE] == 0.5

    def test_empty_high_risk_group(self):
        g = mixing_probabilities([2, 9, 2, 9], [100, 0, 100, 0])
        assert g[Sex.FEMALE] == 0.0
        assert g[Sex.MALE] == 0.0

    def test_degenerate_population(self):
        with pytest.raises(DegeneratePopulationError):
            mixing_probabilities([2, 9, 2, 9], [0, 0, 100, 100])

    def test_complement_sums_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            omega = rng.uniform(0.1, 10, 4)
            alive = rng.uniform(1, 1e6, 4)
            g = mixing_probabilities(omega, alive)
            for sex in Sex:
                assert 0.0 <= g[sex] <= 1.0
                assert g[sex] + (1.0 - g[sex]) == 1.0


class TestWeightedPrevalence:
    def test_zero_infected(self):
        mix = weighted_prevalence([2, 9, 2, 9], [0, 0, 0, 0],
                                  [100, 100, 100, 100])
        assert mix.psi_bar[Sex.FEMALE] == 0.0
        assert mix.psi_bar[Sex.MALE] == 0.0

    def test_known_average(self):
        # male g_high = 0.5 (4*1e5 = 1*4e5), prevalences 0.10 high, 0.02 low
        omega = [1.0, 1.0, 1.0, 4.0]
        alive = [1.0, 1.0, 400_000.0, 100_000.0]
        infected = [0.0, 0.0, 8_000.0, 10_000.0]
        mix = weighted_prevalence(omega, infected, alive)
        assert mix.g_high[Sex.MALE] == pytest.approx(0.5, abs=1e-12)
        assert mix.psi_bar[Sex.MALE] == pytest.approx(0.06, abs=1e-12)

    def test_everyone_infected(self):
        alive = [50.0, 60.0, 70.0, 80.0]
        mix = weighted_prevalence([2, 9, 2, 9], alive, alive)
        assert mix.psi_bar[Sex.FEMALE] == pytest.approx(1.0)
        assert mix.psi_bar[Sex.MALE] == pytest.approx(1.0)

    def test_empty_contributing_stratum(self):
        with pytest.raises(DegeneratePopulationError):
            weighted_prevalence([2, 9, 2, 9], [0, 0, 0, 0], [100, 0, 100, 100])

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        omega = [1.96, 9.0, 2.98, 9.1]
        for _ in range(25):
            alive = rng.uniform(10, 1e5, 4)
            infected = alive * rng.uniform(0, 1, 4)
            base = weighted_prevalence(omega, infected, alive)
            c = rng.uniform(0.01, 100)
            scaled = weighted_prevalence(omega, infected * c, alive * c)
            for sex in Sex:
                assert scaled.psi_bar[sex] == pytest.approx(base.psi_bar[sex],
                                                            rel=1e-12)


class TestForceOfInfection:
    def test_zero_prevalence(self):
        assert force_of_infection(0.16, 9.1, 0.0) == 0.0

    def test_case_study_magnitude(self):
        lam = force_of_infection(0.16, 9.10, 0.01)
        assert lam == pytest.approx(0.014560, abs=1e-9)

    def test_perfect_vaccine(self):
        assert force_of_infection(0.16, 9.1, 0.3, coverage=1.0, efficacy=1.0) == 0.0

    def test_status_quo_reduces_to_plain_rate(self):
        plain = force_of_infection(0.2, 5.0, 0.1)
        assert plain == pytest.approx(0.2 * 5.0 * 0.1)

    def test_monotonicity(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            beta, cov, eff = rng.uniform(0, 1, 3)
            omega = rng.uniform(0, 12)
            psi = rng.uniform(0, 1)
            lam = force_of_infection(beta, omega, psi, cov, eff)
            up = force_of_infection(min(beta * 1.1, 1.0), omega, psi, cov, eff)
            assert up >= lam
            assert force_of_infection(beta, omega * 1.1, psi, cov, eff) >= lam
            assert force_of_infection(beta, omega, min(psi * 1.1, 1.0), cov, eff) >= lam
            less_eff = force_of_infection(beta, omega, psi, cov, eff * 0.9)
            assert less_eff >= lam


class TestRateProbability:
    def test_zero(self):
        assert rate_to_probability(0.0) == 0.0

    def test_log_two(self):
        assert rate_to_probability(np.log(2.0)) == pytest.approx(0.5, abs=1e-12)

    def test_case_study_value(self):
        assert rate_to_probability(0.014560) == pytest.approx(0.0144546, abs=1e-7)

    def test_probability_below_rate(self):
        for lam in np.linspace(0.0, 5.0, 200):
            p = rate_to_probability(lam)
            assert p <= lam
            if lam > 0:
                assert p < lam
            assert 0.0 <= p < 1.0

    def test_roundtrip(self):
        for lam in (1e-6, 0.01, 0.5, 3.0):
            assert probability_to_rate(rate_to_probability(lam)) == pytest.approx(lam, rel=1e-9)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            rate_to_probability(-0.1)


class TestParameterSet:
    def test_probability_bounds_enforced(self):
        with pytest.raises(ValueError):
            make_params(beta=1.2)
        with pytest.raises(ValueError):
            make_params(beta=-0.1)

    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            make_params(c_vac=-1.0)

    def test_utility_anchors(self):
        params = make_params()
        u = params.utilities()
        assert u[0] == 1.0 and u[4] == 0.0
        assert np.all(np.diff(u[:4]) <= 0)  # more severe states weigh less


class TestCohortState:
    def test_negative_counts_rejected(self):
        counts = np.zeros((4, 5))
        counts[0, 0] = -1.0
        with pytest.raises(NegativeStateError):
            CohortState(counts)

    def test_default_cohort(self):
        state = default_initial_cohort()
        assert state.total() == pytest.approx(1_000_000.0)
        assert state.infected.sum() == pytest.approx(600.0)
        assert state.counts[:, HealthState.DEAD - 1].sum() == 0.0
        # 20% high risk, sexes balanced
        assert state.alive[1] + state.alive[3] == pytest.approx(200_000.0)
        assert state.alive[0] + state.alive[1] == pytest.approx(500_000.0)

    def test_stratum_labels(self):
        assert [s.label for s in STRATA] == [
            "female_low", "female_high", "male_low", "male_high"]
