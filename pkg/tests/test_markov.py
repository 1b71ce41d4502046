import numpy as np
import pytest

from collide_charge import (
    ChainVerdict,
    DriftMode,
    EstimationBudget,
    LyapunovFunction,
    QuditState,
    QubitSwapParams,
    ReducibleChainError,
    TransitionMatrix,
    ValidationError,
    check_irreducible,
    classify_empirical,
    classify_qubit_chain,
    ergotropy,
    estimate_return_stats,
    first_return_probability,
    format_report,
    foster_drift_check,
    geometric_distribution,
    hitting_probability,
    qubit_transition_matrix,
    recurrent_lyapunov_qubit,
    rng_for,
    solve_stationary,
    stationary_direct,
    stationary_distribution,
    transient_lyapunov_qubit,
    tv_distance,
)
from collide_charge.sampling import random_bistochastic_spec, random_qudit_state
from collide_charge.transition import build_transition_matrix
from collide_charge.core import StateClass


def qubit_chain(s1: float, n: int, alphas=None) -> TransitionMatrix:
    params = (QubitSwapParams(np.asarray(alphas)) if alphas is not None
              else QubitSwapParams.constant(1.0, n + 1))
    return qubit_transition_matrix(params, QuditState([s1, 1.0 - s1]), n)


def cycle_matrix() -> TransitionMatrix:
    return TransitionMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]), d=2)


class TestIrreducibility:
    def test_identity_is_reducible(self):
        t = TransitionMatrix.from_dense(np.eye(6), d=2)
        assert check_irreducible(t) is False

    def test_swap_chain_is_irreducible(self):
        assert check_irreducible(qubit_chain(0.7, 12)) is True

    def test_severed_link_splits_graph(self):
        alphas = np.ones(13)
        alphas[3] = 0.0  # alpha_5 = 0 cuts 4 <-> 5
        assert check_irreducible(qubit_chain(0.7, 12, alphas)) is False


class TestFosterDriftCheck:
    def test_constant_function_gives_equality_on_interior(self):
        rng = rng_for(31)
        for trial in range(30):
            d = int(rng.integers(2, 6))
            n = int(rng.integers(d + 2, 14))
            spec = random_bistochastic_spec(d, n + d - 1,
                                            int(rng.integers(2**31)))
            t = build_transition_matrix(
                spec, QuditState(rng.dirichlet(np.ones(d))), n)
            f = LyapunovFunction.from_values(np.ones(n), {1})
            report = foster_drift_check(t, f)
            assert report.satisfied
            assert report.mode is None
            interior = report.residuals[1: t.interior_columns]
            assert np.abs(interior).max() < 1e-12

    def test_rejects_mismatched_length(self):
        t = qubit_chain(0.7, 10)
        f = LyapunovFunction.from_values(np.ones(8), {1})
        with pytest.raises(ValidationError):
            foster_drift_check(t, f)

    def test_non_positive_values_rejected(self):
        with pytest.raises(ValidationError):
            LyapunovFunction.from_values(np.array([1.0, 0.0, 1.0]), {1})


class TestRecurrentLyapunov:
    def test_balanced_fuel_is_linear(self):
        params = QubitSwapParams.constant(1.0, 40)
        f = recurrent_lyapunov_qubit(params, QuditState([0.5, 0.5]), 30)
        values = f.values
        assert np.allclose(values[1:], np.arange(1, 30), atol=1e-12)

    def test_single_term_value(self):
        params = QubitSwapParams.constant(1.0, 40)
        f = recurrent_lyapunov_qubit(params, QuditState([0.7, 0.3]), 30)
        assert np.exp(f.log_values[2]) == pytest.approx(1 + 7 / 3, rel=1e-12)

    def test_non_decreasing_and_unbounded(self):
        params = QubitSwapParams.harmonic(60)
        f = recurrent_lyapunov_qubit(params, QuditState([0.6, 0.4]), 50)
        assert np.all(np.diff(f.log_values) >= 0)
        assert f.log_values[-1] > f.log_values[1] + np.log(100)

    @pytest.mark.parametrize("s1", [0.5, 0.6, 0.7, 0.9])
    @pytest.mark.parametrize("profile", ["const", "harmonic"])
    def test_drift_check_passes_in_recurrence_form(self, s1, profile):
        n = 200
        params = (QubitSwapParams.constant(1.0, n + 1) if profile == "const"
                  else QubitSwapParams.harmonic(n + 1))
        xi = QuditState([s1, 1.0 - s1])
        f = recurrent_lyapunov_qubit(params, xi, n)
        report = foster_drift_check(qubit_transition_matrix(params, xi, n), f)
        assert report.satisfied
        assert report.mode is DriftMode.RECURRENCE_FORM

    def test_rejects_active_fuel(self):
        params = QubitSwapParams.constant(1.0, 20)
        with pytest.raises(ValidationError):
            recurrent_lyapunov_qubit(params, QuditState([0.3, 0.7]), 10)

    def test_rejects_zero_alpha(self):
        alphas = np.ones(20)
        alphas[4] = 0.0
        with pytest.raises(ValidationError):
            recurrent_lyapunov_qubit(QubitSwapParams(alphas),
                                     QuditState([0.7, 0.3]), 15)


class TestTransientLyapunov:
    def test_example_parameters_pass_in_transience_form(self):
        xi = QuditState([0.3, 0.7])
        a = (3 / 7 + 1) / 2
        f = transient_lyapunov_qubit(xi, a=a, f1=10.0, delta1=1.0, n=200)
        report = foster_drift_check(qubit_chain(0.3, 200), f)
        assert report.satisfied
        assert report.mode is DriftMode.TRANSIENCE_FORM

    def test_decreasing_and_bounded_below(self):
        xi = QuditState([0.3, 0.7])
        f = transient_lyapunov_qubit(xi, a=0.6, f1=10.0, delta1=1.0, n=500)
        values = f.values
        # strictly decreasing until the geometric decrement underflows,
        # never increasing after that
        assert np.all(np.diff(values[:50]) < 0)
        assert np.all(np.diff(values) <= 0)
        assert values.min() >= 10.0 - 1.0 / (1.0 - 0.6) - 1e-12

    def test_tight_case_gives_equality(self):
        xi = QuditState([0.3, 0.7])
        a = 0.3 / 0.7  # exactly s1/s2: drift inequality tight, s2 = 1/(1+a)
        assert 0.7 == pytest.approx(1 / (1 + a))
        f = transient_lyapunov_qubit(xi, a=a, f1=10.0, delta1=1.0, n=100)
        report = foster_drift_check(qubit_chain(0.3, 100), f)
        assert report.satisfied
        interior = report.residuals[1:-1]
        assert np.abs(interior).max() < 1e-12

    def test_balanced_fuel_has_no_admissible_a(self):
        with pytest.raises(ValidationError):
            transient_lyapunov_qubit(QuditState([0.5, 0.5]), a=0.9, f1=10.0,
                                     delta1=1.0, n=50)

    def test_positivity_guard(self):
        with pytest.raises(ValidationError):
            transient_lyapunov_qubit(QuditState([0.3, 0.7]), a=0.9, f1=5.0,
                                     delta1=1.0, n=50)


class TestClassifyQubitChain:
    def test_strictly_passive_is_positive_recurrent(self):
        for params in (QubitSwapParams.constant(1.0, 16),
                       QubitSwapParams.harmonic(16),
                       QubitSwapParams.constant(0.25, 16)):
            result = classify_qubit_chain(params, QuditState([0.7, 0.3]))
            assert result.verdict is ChainVerdict.POSITIVE_RECURRENT
            assert result.method == "analytic"

    def test_balanced_is_null_recurrent(self):
        result = classify_qubit_chain(QubitSwapParams.constant(1.0, 16),
                                      QuditState([0.5, 0.5]))
        assert result.verdict is ChainVerdict.NULL_RECURRENT

    def test_active_full_swap_is_transient(self):
        result = classify_qubit_chain(QubitSwapParams.constant(1.0, 16),
                                      QuditState([0.3, 0.7]))
        assert result.verdict is ChainVerdict.TRANSIENT
        assert result.method == "analytic"

    def test_active_general_profile_escalates_to_empirical(self):
        budget = EstimationBudget(trials=3000, horizons=(500, 5000), seed=7)
        params = QubitSwapParams.harmonic(802)
        result = classify_qubit_chain(params, QuditState([0.2, 0.8]),
                                      budget=budget, truncation=800)
        assert result.method == "empirical"
        assert result.verdict is ChainVerdict.TRANSIENT
        assert "escalated_from" in result.evidence

    def test_zero_alpha_is_reducible(self):
        alphas = np.ones(16)
        alphas[2] = 0.0
        with pytest.raises(ReducibleChainError):
            classify_qubit_chain(QubitSwapParams(alphas),
                                 QuditState([0.7, 0.3]))


class TestReturnStats:
    def test_deterministic_cycle(self):
        stats = estimate_return_stats(cycle_matrix(), 1, trials=500,
                                      horizon=10, seed=3)
        assert stats.return_probability == 1.0
        assert stats.mean_return_time == 2.0

    def test_reproducible_given_seed(self):
        t = qubit_chain(0.5, 200)
        a = estimate_return_stats(t, 1, 2000, 500, seed=11)
        b = estimate_return_stats(t, 1, 2000, 500, seed=11)
        assert np.array_equal(a.return_time_counts, b.return_time_counts)
        assert a.edge_count == b.edge_count

    def test_transient_return_probability_matches_oracle(self):
        t = qubit_chain(0.3, 800)
        oracle = first_return_probability(t)
        assert oracle == pytest.approx(0.6, abs=1e-10)
        stats = estimate_return_stats(t, 1, trials=20_000, horizon=20_000,
                                      seed=5)
        assert stats.return_probability == pytest.approx(oracle, abs=0.01)

    def test_null_mean_return_grows_with_horizon(self):
        t = qubit_chain(0.5, 1000)
        short = estimate_return_stats(t, 1, 4000, 1_000, seed=9)
        long = estimate_return_stats(t, 1, 4000, 10_000, seed=10)
        assert short.return_probability > 0.97
        assert long.mean_return_time > 1.5 * short.mean_return_time

    def test_edge_paths_reported(self):
        t = qubit_chain(0.1, 6)
        stats = estimate_return_stats(t, 1, 2000, 1000, seed=2)
        assert stats.edge_count > 0
        assert (stats.return_count + stats.edge_count + stats.timeout_count
                == stats.trials)


class TestClassifyEmpirical:
    BUDGET = EstimationBudget(trials=4000, horizons=(1_000, 10_000), seed=23)

    def test_positive_recurrent(self):
        result = classify_empirical(qubit_chain(0.7, 800), 1, self.BUDGET)
        assert result.verdict is ChainVerdict.POSITIVE_RECURRENT

    def test_null_recurrent(self):
        result = classify_empirical(qubit_chain(0.5, 800), 1, self.BUDGET)
        assert result.verdict is ChainVerdict.NULL_RECURRENT

    def test_transient(self):
        result = classify_empirical(qubit_chain(0.3, 800), 1, self.BUDGET)
        assert result.verdict is ChainVerdict.TRANSIENT

    def test_requires_irreducible(self):
        t = TransitionMatrix.from_dense(np.eye(5), d=2)
        with pytest.raises(ReducibleChainError):
            classify_empirical(t, 1, self.BUDGET)

    def test_evidence_carries_thresholds_and_runs(self):
        result = classify_empirical(qubit_chain(0.7, 400), 1, self.BUDGET)
        assert result.evidence["thresholds"]["epsilon_p"] == 0.02
        assert len(result.evidence["runs"]) == 2
        report = format_report(result)
        assert "verdict = positive-recurrent" in report
        assert "evidence.runs[0].horizon = 1000" in report


class TestStationary:
    def test_gibbs_fixed_point(self):
        # residual tolerance limits deep-level ratio accuracy: the leftover
        # transient mode grows like (s1/s2)^(k/2) relative to the tail
        result = solve_stationary(qubit_chain(0.7, 200), tol=1e-14)
        assert result.converged
        p = result.distribution
        ratios = p.probs[1:21] / p.probs[:20]
        assert np.abs(ratios - 3 / 7).max() < 1e-8

    def test_alpha_independence_for_qubit(self):
        xi = QuditState([0.7, 0.3])
        n = 200
        t_full = qubit_transition_matrix(QubitSwapParams.constant(1.0, n + 1),
                                         xi, n)
        t_lazy = qubit_transition_matrix(QubitSwapParams.harmonic(n + 1),
                                         xi, n)
        p_full = stationary_distribution(t_full)
        p_lazy = stationary_distribution(t_lazy)
        assert tv_distance(p_full, p_lazy) < 1e-8

    def test_detailed_balance_residual(self):
        n = 150
        params = QubitSwapParams.harmonic(n + 1)
        xi = QuditState([0.65, 0.35])
        p = stationary_distribution(qubit_transition_matrix(params, xi, n))
        s1, s2 = 0.65, 0.35
        for k in range(1, 40):
            alpha = params.alpha(k + 1)
            residual = abs(alpha * s2 * p.probs[k - 1]
                           - alpha * s1 * p.probs[k])
            assert residual < 1e-12

    def test_invariant_under_initial_vector(self):
        t = qubit_chain(0.6, 150)
        a = solve_stationary(t).distribution
        b = solve_stationary(
            t, initial=geometric_distribution(0.9, 150).probs).distribution
        assert tv_distance(a, b) < 1e-10

    def test_matches_direct_solve(self):
        t = qubit_chain(0.65, 120)
        power = solve_stationary(t).distribution
        direct = stationary_direct(t)
        assert np.abs(power.probs - direct).max() < 1e-9

    def test_null_chain_has_no_fixed_point(self):
        result = solve_stationary(qubit_chain(0.5, 120), max_iters=20_000)
        assert not result.converged
        assert result.distribution is None
        assert "escapes" in result.reason

    def test_transient_chain_has_no_fixed_point(self):
        result = solve_stationary(qubit_chain(0.3, 120), max_iters=20_000)
        assert not result.converged

    def test_reducible_chain_rejected(self):
        with pytest.raises(ReducibleChainError):
            stationary_distribution(TransitionMatrix.from_dense(np.eye(5), d=2))

    def test_multilevel_passive_fixed_points_differ_by_spec(self):
        d, n = 5, 120
        fuel = random_qudit_state(d, StateClass.STRICTLY_PASSIVE, rng_for(91))
        results = []
        for seed in (101, 202):
            spec = random_bistochastic_spec(d, n + d - 1, seed)
            t = build_transition_matrix(spec, fuel, n)
            p = stationary_distribution(t)
            assert ergotropy(p) < 1e-8
            results.append(p)
        assert tv_distance(results[0], results[1]) > 0.01


class TestHittingProbability:
    def test_matches_birth_death_formula(self):
        t = qubit_chain(0.3, 400)
        h = hitting_probability(t)
        # From level k, reaching level 1 against upward drift: (s1/s2)^(k-1)
        expected = (3 / 7) ** np.arange(0, 8)
        assert np.abs(h[:8] - expected).max() < 1e-10

    def test_recurrent_chain_hits_with_probability_one(self):
        t = qubit_chain(0.7, 300)
        h = hitting_probability(t)
        assert np.abs(h[:100] - 1.0).max() < 1e-8


class TestEstimationBudget:
    def test_requires_two_horizons(self):
        with pytest.raises(ValidationError):
            EstimationBudget(horizons=(100,))

    def test_requires_increasing_horizons(self):
        with pytest.raises(ValidationError):
            EstimationBudget(horizons=(100, 100))
