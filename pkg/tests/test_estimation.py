import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concentric.errors import DomainError, NonIdentifiableError, UnsupportedError
from concentric.estimation import (
    BOUNDARY,
    NEGATIVE_CLAMPED,
    NON_IDENTIFIABLE,
    NOT_CONVERGED,
    EMConfig,
    closed_form_latent,
    derived_measures,
    em_estep,
    em_fit,
    em_mstep,
    em_update,
    grid_mle_oracle,
    leaf_pair_csds,
    leaf_sum_second_moment,
    loglik,
    mle_observed,
    mom_estimate,
    T_term,
)
from concentric.model import (
    ModelSpec,
    integer_vector,
    joint_vector_direct,
    marginal_leaves,
    sample,
)
from concentric.tables import CountTable

from oracles import effect_coded


def exact_counts(Q, alpha, root=True):
    full = np.array(integer_vector(ModelSpec.from_alpha(Q, alpha)), dtype=float)
    if root:
        return CountTable(Q, True, full)
    half = 1 << Q
    return CountTable(Q, False, full[:half] + full[half:])


def population(Q, rho, n=1.0, root=False):
    spec = ModelSpec.from_rho(Q, rho)
    pi = joint_vector_direct(spec) if root else marginal_leaves(spec)
    return CountTable(Q, root, n * pi.entries)


def brute_loglik(rho, table):
    pi = marginal_leaves(ModelSpec.from_rho(table.Q, rho)).entries
    return float(np.sum(table.counts * np.log(pi)))


class TestObservedRoot:
    def test_exact_q2(self):
        est = mle_observed(exact_counts(2, 3))
        assert est.rho == pytest.approx(0.5, abs=1e-15)
        assert est.flags == ()
        assert est.alpha == pytest.approx(3.0)

    def test_single_pair(self):
        est = mle_observed(CountTable(1, True, [40, 10, 10, 40]))
        assert est.rho == pytest.approx(0.6, abs=1e-15)

    def test_boundary(self):
        counts = np.zeros(8)
        counts[0] = counts[7] = 5
        est = mle_observed(CountTable(2, True, counts))
        assert est.raw == 1.0
        assert est.rho == math.nextafter(1.0, 0.0)
        assert BOUNDARY in est.flags

    def test_negative(self):
        est = mle_observed(CountTable(1, True, [10, 40, 40, 10]))
        assert est.raw == pytest.approx(-0.6)
        assert est.rho == 0.0
        assert NEGATIVE_CLAMPED in est.flags and NON_IDENTIFIABLE in est.flags

    def test_needs_root(self):
        with pytest.raises(DomainError):
            mle_observed(exact_counts(2, 3, root=False))

    def test_empty(self):
        with pytest.raises(DomainError):
            mle_observed(CountTable(1, True, [0, 0, 0, 0]))

    @pytest.mark.parametrize("Q", [1, 3, 6])
    @pytest.mark.parametrize("rho", [0.0, 0.2, 0.85])
    def test_population(self, Q, rho):
        assert mle_observed(population(Q, rho, 1000.0, root=True)).rho == pytest.approx(
            rho, abs=1e-12)


class TestMethodOfMoments:
    def test_exact_q2(self):
        counts = exact_counts(2, 3, root=False)
        np.testing.assert_array_equal(counts.counts, [10, 6, 6, 10])
        assert leaf_sum_second_moment(counts) == pytest.approx(0.625, abs=1e-15)
        est = mom_estimate(counts)
        assert est.rho_sq == pytest.approx(0.25, abs=1e-15)
        assert est.rho == pytest.approx(0.5, abs=1e-15)

    def test_uniform(self):
        est = mom_estimate(CountTable(3, False, np.ones(8)))
        assert est.rho_sq == 0.0
        assert NON_IDENTIFIABLE in est.flags

    def test_q4_population(self):
        assert mom_estimate(population(4, 0.8)).rho_sq == pytest.approx(0.64, abs=1e-12)

    def test_single_leaf(self):
        with pytest.raises(NonIdentifiableError):
            mom_estimate(CountTable(1, False, [3, 4]))

    def test_drops_root(self):
        a = mom_estimate(exact_counts(3, 3))
        b = mom_estimate(exact_counts(3, 3, root=False))
        assert a.rho_sq == b.rho_sq

    def test_second_moment_brute_force(self):
        rng = np.random.default_rng(5)
        counts = rng.integers(0, 30, size=32).astype(float)
        sbar = effect_coded(5).mean(axis=1)
        expected = np.dot(counts, sbar ** 2) / counts.sum()
        assert leaf_sum_second_moment(CountTable(5, False, counts)) == pytest.approx(
            expected, rel=1e-13)


class TestClosedFormLatent:
    def test_exact_q2(self):
        counts = exact_counts(2, 3, root=False)
        assert leaf_pair_csds(counts) == {(0, 1): pytest.approx(0.25)}
        est = closed_form_latent(counts)
        assert est.rho_sq == pytest.approx(0.25, abs=1e-15)

    def test_uniform(self):
        assert closed_form_latent(CountTable(2, False, [5, 5, 5, 5])).rho_sq == 0.0

    def test_exact_q3(self):
        counts = exact_counts(3, 3, root=False)
        np.testing.assert_array_equal(counts.counts, [28, 12, 12, 12, 12, 12, 12, 28])
        assert closed_form_latent(counts).rho_sq == pytest.approx(0.25, abs=1e-12)

    def test_q3_sufficient_statistic(self):
        # mean pairwise csd depends only on the count of all-equal patterns
        rng = np.random.default_rng(8)
        for _ in range(20):
            c = rng.integers(0, 50, size=8).astype(float)
            n, n_equal = c.sum(), c[0] + c[7]
            assert closed_form_latent(CountTable(3, False, c)).raw == pytest.approx(
                (4 * n_equal - n) / (3 * n), abs=1e-14)

    def test_negative_clamped(self):
        est = closed_form_latent(CountTable(2, False, [1, 9, 9, 1]))
        assert est.rho_sq == 0.0
        assert NEGATIVE_CLAMPED in est.flags

    @pytest.mark.parametrize("Q", [1, 4, 5])
    def test_unsupported(self, Q):
        with pytest.raises(UnsupportedError, match="em_fit"):
            closed_form_latent(CountTable(Q, False, np.ones(1 << Q)))

    @pytest.mark.parametrize("Q", [2, 3])
    def test_is_likelihood_maximum(self, Q):
        rng = np.random.default_rng(Q)
        for _ in range(10):
            c = CountTable(Q, False, rng.integers(1, 40, size=1 << Q).astype(float))
            est = closed_form_latent(c)
            if est.raw <= 0 or est.raw >= 1:
                continue
            grid = np.linspace(0, 0.999, 1000)
            assert loglik(est.rho, c) >= loglik(grid, c).max() - 1e-9


class TestLoglik:
    def test_uniform_independence(self):
        c = CountTable(3, False, np.full(8, 5.0))
        assert loglik(0.0, c) == pytest.approx(40 * math.log(2 ** -3), rel=1e-14)

    def test_grid_maximum_at_truth(self):
        c = population(3, 0.5, 128.0)
        grid = np.round(np.arange(1000) * 1e-3, 3)
        values = loglik(grid, c)
        assert grid[np.argmax(values)] == 0.5
        assert loglik(0.5, c) >= values.max()

    def test_finite_on_unit_interval(self):
        c = CountTable(4, False, np.arange(16, dtype=float))
        assert np.all(np.isfinite(loglik(np.linspace(0, 0.99, 200), c)))

    def test_extreme_rho_stays_finite(self):
        c = CountTable(10, False, np.ones(1024))
        assert math.isfinite(loglik(1 - 1e-12, c))

    @pytest.mark.parametrize("rho", [0.0, 0.3, 0.77])
    def test_brute_force(self, rho):
        c = CountTable(5, False, np.random.default_rng(1).integers(0, 9, size=32).astype(float))
        assert loglik(rho, c) == pytest.approx(brute_loglik(rho, c), rel=1e-12)

    def test_array_matches_scalar(self):
        c = population(4, 0.6, 50.0)
        rhos = np.array([0.1, 0.6, 0.9])
        np.testing.assert_allclose(loglik(rhos, c), [loglik(r, c) for r in rhos], rtol=1e-14)

    @pytest.mark.parametrize("rho", [-0.1, 1.0])
    def test_domain(self, rho):
        with pytest.raises(DomainError):
            loglik(rho, population(2, 0.5))


class TestGridOracle:
    def test_exact_q2(self):
        assert grid_mle_oracle(exact_counts(2, 3, root=False)) == pytest.approx(0.5, abs=1e-3)

    def test_uniform(self):
        assert grid_mle_oracle(CountTable(4, False, np.ones(16))) == 0.0

    def test_agrees_with_em(self):
        c = sample(ModelSpec.from_rho(4, 0.7), 1000, seed=11)
        trace = em_fit(c, EMConfig(tolerance=1e-10, max_iterations=10000))
        assert abs(grid_mle_oracle(c) - trace.final_rho) <= 2e-3

    @pytest.mark.parametrize("step", [0.0, 0.02])
    def test_bad_step(self, step):
        with pytest.raises(DomainError):
            grid_mle_oracle(population(2, 0.5, 10.0), step)


class TestEStep:
    def test_independence_halves(self):
        c = CountTable(3, False, np.arange(1, 9, dtype=float))
        pseudo = em_estep(ModelSpec.from_rho(3, 0.0), c)
        np.testing.assert_allclose(pseudo.counts[:8], pseudo.counts[8:], atol=0)
        np.testing.assert_allclose(pseudo.counts[8:], c.counts / 2)

    def test_all_success_pattern(self):
        pseudo = em_estep(ModelSpec.from_alpha(3, 3), exact_counts(3, 3, root=False))
        assert pseudo.counts[15] == pytest.approx(27.0, abs=1e-12)
        assert pseudo.counts[7] == pytest.approx(1.0, abs=1e-12)

    def test_recovers_exact_joint(self):
        pseudo = em_estep(ModelSpec.from_alpha(3, 3), exact_counts(3, 3, root=False))
        np.testing.assert_allclose(pseudo.counts, exact_counts(3, 3).counts, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), Q=st.integers(1, 6), rho=st.floats(0, 0.99))
    def test_margins_preserved(self, seed, Q, rho):
        c = CountTable(Q, False, np.random.default_rng(seed).integers(0, 100, 1 << Q))
        pseudo = em_estep(ModelSpec.from_rho(Q, rho), c)
        half = 1 << Q
        np.testing.assert_allclose(pseudo.counts[:half] + pseudo.counts[half:], c.counts,
                                   rtol=1e-14)

    def test_mismatched_Q(self):
        with pytest.raises(DomainError):
            em_estep(ModelSpec.from_rho(2, 0.5), population(3, 0.5))


class TestMStep:
    @pytest.mark.parametrize("Q", [1, 2, 4, 7])
    @pytest.mark.parametrize("rho", [0.0, 0.4, 0.9])
    def test_stationary(self, Q, rho):
        assert em_mstep(population(Q, rho, 1.0, root=True)) == pytest.approx(rho, abs=1e-12)

    def test_symmetric_pseudo_counts(self):
        half = np.arange(1, 9, dtype=float)
        assert em_mstep(CountTable(3, True, np.concatenate((half, half)))) == 0.0

    def test_matches_observed_mle(self):
        rng = np.random.default_rng(2)
        for Q in (1, 2, 3, 5):
            c = CountTable(Q, True, rng.integers(0, 20, size=2 << Q).astype(float))
            c.require_n()
            assert em_mstep(c) == pytest.approx(mle_observed(c).raw, abs=1e-14)

    def test_needs_root(self):
        with pytest.raises(DomainError):
            em_mstep(population(2, 0.5))

    @pytest.mark.parametrize("rho", [0.1, 0.5, 0.95])
    def test_update_is_estep_then_mstep(self, rho):
        c = CountTable(4, False, np.random.default_rng(3).integers(0, 50, 16).astype(float))
        two_step = em_mstep(em_estep(ModelSpec.from_rho(4, rho), c))
        assert em_update(rho, c) == pytest.approx(two_step, abs=1e-14)


class TestTTerm:
    def test_values(self):
        assert T_term(3.0, 2) == pytest.approx(1.6, abs=1e-15)
        assert T_term(9.0, 1) == pytest.approx(0.8, abs=1e-15)
        assert T_term(1.0, 5) == 0.0
        assert T_term(3.0, 0) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(alpha=st.floats(1.0, 1e6), s=st.integers(-60, 60))
    def test_even_and_nonnegative(self, alpha, s):
        assert T_term(alpha, s) >= 0.0
        assert T_term(alpha, s) == T_term(alpha, -s)

    def test_no_overflow(self):
        out = T_term(1e6, np.array([-400, 400]))
        np.testing.assert_array_equal(out, [400.0, 400.0])

    def test_matches_ratio_form(self):
        s = np.arange(-6, 7)
        alpha = 2.5
        np.testing.assert_allclose(T_term(alpha, s), s * (alpha ** s - 1) / (alpha ** s + 1),
                                   rtol=1e-14, atol=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            T_term(0.5, 1)


class TestEMFit:
    def test_fixed_point_one_iteration(self):
        trace = em_fit(exact_counts(2, 3, root=False), EMConfig(init=0.5))
        assert trace.n_iterations == 1
        assert trace.converged
        assert trace.final_rho == pytest.approx(0.5, abs=1e-12)
        assert trace.flags == ()

    def test_uniform_non_identifiable(self):
        trace = em_fit(CountTable(4, False, np.full(16, 10.0)))
        assert trace.final_rho == 0.0
        assert NON_IDENTIFIABLE in trace.flags
        assert trace.converged

    def test_sampled_q4(self):
        c = sample(ModelSpec.from_rho(4, 0.7), 1000, seed=4)
        trace = em_fit(c, EMConfig(tolerance=1e-7))
        assert trace.converged
        assert trace.n_iterations <= 20
        assert trace.is_monotone(1e-10)

    @pytest.mark.parametrize("Q", [2, 4, 6])
    @pytest.mark.parametrize("rho", [0.3, 0.6, 0.9])
    def test_population_recovery(self, Q, rho):
        trace = em_fit(population(Q, rho, 1000.0), EMConfig(tolerance=1e-13, max_iterations=100000))
        assert trace.final_rho == pytest.approx(rho, abs=1e-8)

    def test_trace_records(self):
        c = sample(ModelSpec.from_rho(3, 0.5), 500, seed=2)
        trace = em_fit(c, EMConfig(tolerance=1e-7, init=0.2))
        first = trace.iterations[0]
        assert first.m == 0 and first.rho == 0.2
        assert first.alpha == pytest.approx(1.5)
        assert [s.m for s in trace.iterations] == list(range(trace.n_iterations + 1))
        for step in trace.iterations:
            assert step.loglik == pytest.approx(loglik(step.rho, c), rel=1e-14)
        assert trace.final_alpha == pytest.approx((1 + trace.final_rho) / (1 - trace.final_rho))

    def test_not_converged(self):
        c = sample(ModelSpec.from_rho(4, 0.6), 300, seed=1)
        trace = em_fit(c, EMConfig(tolerance=1e-15, max_iterations=2, init=0.05))
        assert not trace.converged
        assert NOT_CONVERGED in trace.flags
        assert trace.n_iterations == 2

    def test_boundary(self):
        counts = np.zeros(16)
        counts[0] = counts[15] = 50
        trace = em_fit(CountTable(4, False, counts), EMConfig(max_iterations=50))
        assert BOUNDARY in trace.flags
        assert trace.final_rho < 1.0

    def test_single_leaf(self):
        with pytest.raises(NonIdentifiableError):
            em_fit(CountTable(1, False, [4, 6]))

    def test_empty(self):
        with pytest.raises(DomainError):
            em_fit(CountTable(3, False, np.zeros(8)))

    def test_root_column_ignored(self):
        with_root = sample(ModelSpec.from_rho(3, 0.6), 400, seed=9, include_root=True)
        a = em_fit(with_root)
        b = em_fit(with_root.leaves_only())
        assert a.final_rho == b.final_rho

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), Q=st.integers(2, 6), init=st.floats(0.01, 0.99))
    def test_monotone_on_random_tables(self, seed, Q, init):
        c = CountTable(Q, False, np.random.default_rng(seed).integers(0, 30, 1 << Q))
        if c.n == 0:
            return
        trace = em_fit(c, EMConfig(tolerance=1e-8, max_iterations=300, init=init))
        assert trace.is_monotone(1e-10)

    @pytest.mark.parametrize("kwargs", [
        {"tolerance": 0.0}, {"max_iterations": 0}, {"init": 1.0}, {"init": 0.0},
    ])
    def test_config_validation(self, kwargs):
        with pytest.raises(DomainError):
            EMConfig(**kwargs)


def test_derived_measures():
    d = derived_measures(0.8)
    assert d["odds_ratio"] == pytest.approx(81.0)
    assert d["relative_chance"] == pytest.approx(9.0)
    assert d["chance_difference"] == 0.8
    assert d["leaf_correlation"] == pytest.approx(0.64)
    assert d["loglinear_two_factor"] == pytest.approx(math.log(3.0))
