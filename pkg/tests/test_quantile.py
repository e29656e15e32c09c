import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtrg.errors import InvalidArgumentError
from qtrg.field import FieldSnapshot
from qtrg.quantile import (
    P_INDICATOR,
    SINGLE_PERCENTILE,
    SampleBudget,
    estimate_percentiles,
    exact_percentile,
    implied_epsilon,
    order_index,
    percentile_rank,
    quantile_error_study,
    samples_needed,
)

# Frozen with 30-digit mpmath evaluation of ceil(ln(c/delta) / (2 eps^2)).
K_PIND_001_0001 = 46_964
K_SINGLE_0001_0001 = 4_147_025


def brute_percentile(values, a_percent):
    """Smallest x with #{v <= x} * 100 >= a_percent * N, in exact integer arithmetic."""
    vals = sorted(values)
    n = len(vals)
    for x in vals:
        if sum(1 for v in vals if v <= x) * 100 >= a_percent * n:
            return x
    raise AssertionError("unreachable")


class TestSamplesNeeded:
    def test_indicator_bound_at_default_setting(self):
        assert samples_needed(0.01, 0.001, P_INDICATOR) == K_PIND_001_0001

    def test_four_million_single(self):
        k = samples_needed(0.001, 0.001, SINGLE_PERCENTILE)
        assert k == K_SINGLE_0001_0001
        assert 4.1e6 <= k <= 4.2e6

    def test_floor_is_one(self):
        assert samples_needed(0.5, 0.999999, SINGLE_PERCENTILE) >= 1

    @pytest.mark.parametrize("eps,delta", [(0, 0.1), (1, 0.1), (1.5, 0.1), (0.1, 0), (0.1, 1)])
    def test_rejects_out_of_range(self, eps, delta):
        with pytest.raises(InvalidArgumentError):
            samples_needed(eps, delta)

    def test_aliases(self):
        assert samples_needed(0.02, 0.01, "pind") == samples_needed(0.02, 0.01, P_INDICATOR)
        assert samples_needed(0.02, 0.01, "single") == samples_needed(0.02, 0.01, SINGLE_PERCENTILE)
        with pytest.raises(InvalidArgumentError):
            samples_needed(0.02, 0.01, "triple")

    def test_indicator_needs_more_than_single(self):
        assert samples_needed(0.01, 0.01, P_INDICATOR) > samples_needed(0.01, 0.01, SINGLE_PERCENTILE)

    @given(st.floats(0.001, 0.5), st.floats(1e-6, 0.5))
    def test_k_satisfies_hoeffding_tail(self, eps, delta):
        k = samples_needed(eps, delta, SINGLE_PERCENTILE)
        assert 2 * math.exp(-2 * eps * eps * k) <= delta / 2 * (1 + 1e-9)
        if k > 1:
            assert 2 * math.exp(-2 * eps * eps * (k - 1)) > delta / 2

    def test_budget_round_trip(self):
        b = SampleBudget.for_error(0.01, 0.001)
        assert b.k == K_PIND_001_0001
        fixed = SampleBudget.of_size(48_000)
        assert fixed.epsilon < 0.01
        assert implied_epsilon(b.k, 0.001, P_INDICATOR) <= 0.01


class TestExactPercentile:
    def test_median_of_ten(self):
        assert exact_percentile([10, 20, 30, 40, 50, 60, 70, 80, 90, 100], 0.5) == 50

    def test_alpha_one_is_max(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=77)
        assert exact_percentile(v, 1.0) == v.max()

    def test_permutation(self):
        v = np.random.default_rng(1).permutation(np.arange(1, 1001))
        assert exact_percentile(v, 0.94) == 940

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            exact_percentile([], 0.5)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.01])
    def test_level_domain(self, alpha):
        with pytest.raises(InvalidArgumentError):
            exact_percentile([1.0, 2.0], alpha)

    def test_tiny_alpha_clamps_to_min(self):
        assert exact_percentile([3.0, 1.0, 2.0], 1e-9) == 1.0

    def test_decimal_reading_of_level(self):
        # 0.94 * 100 in binary floating point is 94.00000000000001
        assert order_index(0.94, 100) == 94
        assert order_index(0.07, 100) == 7

    @settings(max_examples=200)
    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=200), st.integers(1, 100))
    def test_matches_count_oracle(self, values, a_percent):
        assert exact_percentile(values, a_percent / 100) == brute_percentile(values, a_percent)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=100), st.floats(0.001, 1.0))
    def test_order_irrelevant(self, values, alpha):
        assert exact_percentile(values, alpha) == exact_percentile(values[::-1], alpha)


class TestPercentileRank:
    def test_simple(self):
        assert percentile_rank([1, 2, 3, 4], 2) == 0.5

    def test_permutation(self):
        v = np.random.default_rng(2).permutation(np.arange(1, 1001))
        assert percentile_rank(v, 940) == 0.94

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            percentile_rank([], 1.0)

    @given(st.lists(st.integers(-20, 20), min_size=1, max_size=100), st.floats(0.01, 1.0))
    def test_rank_of_percentile_at_least_level(self, values, alpha):
        x = exact_percentile(values, alpha)
        assert percentile_rank(values, x) >= alpha - 1e-12


def _uniform_grid(N):
    return FieldSnapshot.from_array(np.linspace(0.0, 1.0, N))


class TestEstimatePercentiles:
    def test_constant_field(self):
        f = FieldSnapshot.from_array(np.full(1000, 3.14))
        est = estimate_percentiles(f, [0.01, 0.5, 0.99], 200, seed=5)
        assert all(e.value == 3.14 for e in est)

    def test_linspace_estimate_close(self):
        f = _uniform_grid(451_584)
        hits = 0
        for seed in range(100):
            (e,) = estimate_percentiles(f, [0.94], 48_000, seed)
            hits += abs(e.value - 0.94) <= 0.01
        assert hits >= 99

    def test_exhaustive_equals_exact(self):
        v = np.random.default_rng(3).exponential(size=999)
        f = FieldSnapshot.from_array(v)
        levels = [0.01, 0.33, 0.5, 0.94, 1.0]
        est = estimate_percentiles(f, levels, exhaustive=True)
        assert [e.value for e in est] == [exact_percentile(v, a) for a in levels]

    def test_values_come_from_field(self):
        v = np.random.default_rng(4).normal(size=500)
        f = FieldSnapshot.from_array(v)
        for e in estimate_percentiles(f, [0.1, 0.9], 50, seed=1):
            assert e.value in set(v.tolist())
            assert e.k_used == 50 and e.seed == 1

    def test_shared_sample_is_monotone(self):
        f = FieldSnapshot.from_array(np.random.default_rng(5).normal(size=10_000))
        levels = sorted(np.random.default_rng(6).uniform(0.001, 1.0, size=30))
        values = [e.value for e in estimate_percentiles(f, levels, 300, seed=2)]
        assert values == sorted(values)

    def test_single_draw_for_all_levels(self):
        f = FieldSnapshot.lazy(lambda idx: idx.astype(float), 10_000)
        estimate_percentiles(f, [0.01, 0.94, 0.98], 777, seed=0)
        assert f.eval_count == 777

    def test_shared_sample_reads_same_order_statistics(self):
        f = FieldSnapshot.from_array(np.random.default_rng(7).normal(size=2000))
        a, b = estimate_percentiles(f, [0.2, 0.8], 100, seed=9)
        (a2,) = estimate_percentiles(f, [0.2], 100, seed=9)
        assert a.value == a2.value

    @pytest.mark.parametrize("N", [10**4, 10**6, 10**7])
    def test_eval_count_independent_of_size(self, N):
        f = FieldSnapshot.lazy(lambda idx: np.cos(idx.astype(float)), N)
        estimate_percentiles(f, [0.01, 0.94, 0.98], SampleBudget.for_error(0.05, 0.01), seed=3)
        assert f.eval_count == samples_needed(0.05, 0.01, P_INDICATOR)

    def test_requires_budget(self):
        f = _uniform_grid(10)
        with pytest.raises(InvalidArgumentError):
            estimate_percentiles(f, [0.5])

    def test_concentration_within_binomial_slack(self):
        eps, delta, runs = 0.05, 0.1, 200
        budget = SampleBudget.for_error(eps, delta, SINGLE_PERCENTILE)
        v = np.random.default_rng(8).gamma(2.0, size=50_000)
        f = FieldSnapshot.from_array(v)
        stats = quantile_error_study(f, 0.7, budget, runs=runs, seed=0)
        failures = np.mean(np.abs(stats.errors) > eps)
        slack = 2.576 * math.sqrt(delta * (1 - delta) / runs)
        assert failures <= delta + slack


class TestErrorStudy:
    def test_constant_field_errors_are_ties(self):
        f = FieldSnapshot.from_array(np.full(5000, 2.0))
        stats = quantile_error_study(f, 0.94, 100, runs=10, seed=0)
        assert np.all(stats.errors >= 0)
        assert np.allclose(np.abs(stats.errors), 1 - 0.94)
        assert np.all(stats.estimates == 2.0)

    def test_more_samples_smaller_error(self):
        f = _uniform_grid(451_584)
        small = quantile_error_study(f, 0.94, 12_000, runs=100, seed=0)
        large = quantile_error_study(f, 0.94, 48_000, runs=100, seed=0)
        assert small.mean_abs > large.mean_abs
        assert large.max_abs <= 0.01

    def test_seeds_are_offsets(self):
        v = np.random.default_rng(9).normal(size=3000)
        f = FieldSnapshot.from_array(v)
        stats = quantile_error_study(f, 0.5, 100, runs=3, seed=10)
        (e,) = estimate_percentiles(f, [0.5], 100, seed=12)
        assert stats.estimates[2] == e.value

    def test_serialization(self):
        f = _uniform_grid(1000)
        stats = quantile_error_study(f, 0.5, 50, runs=4, seed=0)
        lines = stats.to_csv().splitlines()
        assert lines[0] == "run,epsilon" and len(lines) == 5
        summary = json.loads(stats.summary_json())
        assert set(summary) >= {"mean_abs", "max_abs", "q25", "q50", "q75"}
        assert summary["q25"] <= summary["q50"] <= summary["q75"]

    def test_runs_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            quantile_error_study(_uniform_grid(10), 0.5, 5, runs=0)
