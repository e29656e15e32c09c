import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtrg.errors import DegenerateRangeError, InvalidArgumentError
from qtrg.field import FieldSnapshot
from qtrg.indicator import (
    DEFAULT_PARAMS,
    IndicatorParams,
    draw_params,
    evaluate,
    indicator_error_study,
    indicator_exact,
    indicator_sampled,
    p_indicator,
    series_from_csv,
    series_to_csv,
)
from qtrg.quantile import SINGLE_PERCENTILE, SampleBudget, exact_percentile
from qtrg.scenario import generate_snapshot

# 93/97 evaluated to 30 digits.
UNIFORM_P = 0.958762886597938144329896907217

BUDGET = SampleBudget.for_error(0.01, 0.001)


def test_formula_examples():
    assert p_indicator(0.94, 0.98, 0.01) == pytest.approx(UNIFORM_P, abs=1e-15)
    assert p_indicator(0.2, 0.9, 0.2) == 0.0
    assert p_indicator(0.9, 0.9, 0.2) == 1.0


@pytest.mark.parametrize("pb,pg", [(1.0, 1.0), (5e9, 5e9 + 1e-4), (0.0, 1e-13)])
def test_degenerate_span(pb, pg):
    with pytest.raises(DegenerateRangeError):
        p_indicator(pb, pb, pg)


def test_small_but_resolved_span():
    assert p_indicator(1e-9, 2e-9, 0.0) == pytest.approx(0.5)


def test_uniform_value_property():
    assert DEFAULT_PARAMS.uniform_value == pytest.approx(UNIFORM_P, abs=1e-15)


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        IndicatorParams(alpha=0.99, beta=0.98)
    with pytest.raises(InvalidArgumentError):
        IndicatorParams(gamma=0.0)
    with pytest.raises(InvalidArgumentError):
        IndicatorParams(alpha_range=(0.9, 0.985))
    with pytest.raises(InvalidArgumentError):
        IndicatorParams(gamma_range=(0.04, 0.02))
    IndicatorParams(gamma_range=(0.02, 0.04))


def test_exact_on_linspace():
    f = FieldSnapshot.from_array(np.linspace(0.0, 1.0, 100_000))
    pt = indicator_exact(f)
    assert abs(pt.value - UNIFORM_P) <= 0.001
    assert pt.mode == "exact" and pt.k is None


def test_exact_recomputes_from_percentiles():
    v = np.random.default_rng(0).lognormal(size=4321)
    pt = indicator_exact(FieldSnapshot.from_array(v))
    pa, pb, pg = (exact_percentile(v, a) for a in (0.94, 0.98, 0.01))
    assert (pt.p_alpha, pt.p_beta, pt.p_gamma) == (pa, pb, pg)
    assert pt.value == (pa - pg) / (pb - pg)
    assert 0.0 <= pt.value <= 1.0


def test_low_heavy_field_is_below_uniform():
    rng = np.random.default_rng(1)
    n = 100_000
    low = rng.uniform(0.0, 0.01, size=9 * n // 10)
    top = rng.uniform(0.1, 1.0, size=n // 10)
    pt = indicator_exact(FieldSnapshot.from_array(np.concatenate([low, top])))
    assert pt.value < UNIFORM_P - 0.2


def test_constant_field_is_degenerate():
    with pytest.raises(DegenerateRangeError):
        indicator_exact(FieldSnapshot.from_array(np.full(100, 7.0)))
    pt = evaluate(FieldSnapshot.from_array(np.full(100, 7.0)), exact=True)
    assert pt.degenerate and pt.value is None


def test_sampled_degenerate_marker_keeps_seed():
    pt = evaluate(FieldSnapshot.from_array(np.full(100, 7.0)), budget=BUDGET, seed=4)
    assert pt.degenerate and pt.mode == "sampled" and pt.seed == 4 and pt.k == BUDGET.k


def test_exhaustive_equals_exact():
    v = np.random.default_rng(2).normal(size=2345)
    f = FieldSnapshot.from_array(v)
    a = indicator_exact(f)
    b = indicator_sampled(f, exhaustive=True)
    assert (a.value, a.p_alpha, a.p_beta, a.p_gamma) == (b.value, b.p_alpha, b.p_beta, b.p_gamma)


def test_sampled_requires_indicator_budget():
    f = FieldSnapshot.from_array(np.arange(10.0))
    with pytest.raises(InvalidArgumentError):
        indicator_sampled(f, budget=SampleBudget.for_error(0.01, 0.001, SINGLE_PERCENTILE))
    with pytest.raises(InvalidArgumentError):
        indicator_sampled(f)


def test_sampled_lazy_costs_k():
    f = FieldSnapshot.lazy(lambda idx: np.sin(idx.astype(float)), 10**6)
    pt = indicator_sampled(f, budget=BUDGET, seed=1)
    assert f.eval_count == BUDGET.k == pt.k


def test_two_spikes_across_gap():
    v = np.zeros(100_000)
    v[96_000:] = 1.0
    f = FieldSnapshot.from_array(v)
    exact = indicator_exact(f)
    assert exact.value == 0.0
    for seed in range(20):
        assert indicator_sampled(f, budget=BUDGET, seed=seed).value == exact.value


def test_sampled_error_on_scenario(hcci):
    field = generate_snapshot(hcci, 200 * hcci.substeps)
    exact = indicator_exact(field)
    small = indicator_error_study(field, k=12_000, runs=100, seed=0, exact_point=exact)
    large = indicator_error_study(field, k=48_000, runs=100, seed=0, exact_point=exact)
    assert large.mean_abs <= 0.02
    assert large.mean_abs < small.mean_abs


def test_draw_params():
    p = IndicatorParams(gamma=0.03, gamma_range=(0.02, 0.04))
    drawn = [draw_params(p, s).gamma for s in range(50)]
    assert all(0.02 <= g <= 0.04 for g in drawn)
    assert len(set(drawn)) > 40
    assert draw_params(p, 7) == draw_params(p, 7)
    assert draw_params(DEFAULT_PARAMS, 3) == DEFAULT_PARAMS
    fixed = IndicatorParams(beta=0.97, beta_range=(0.97, 0.97))
    assert draw_params(fixed, 9).beta == 0.97


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.01, 1e3),
    st.floats(-1e3, 1e3),
    st.integers(0, 2**32),
)
def test_affine_invariance(a, b, seed):
    v = np.random.default_rng(seed).gamma(1.5, size=3000)
    f = FieldSnapshot.from_array(v)
    g = FieldSnapshot.from_array(a * v + b)
    assert indicator_exact(g).value == pytest.approx(indicator_exact(f).value, rel=1e-9, abs=1e-9)
    budget = SampleBudget.of_size(500)
    ps = indicator_sampled(f, budget=budget, seed=seed).value
    pg = indicator_sampled(g, budget=budget, seed=seed).value
    assert pg == pytest.approx(ps, rel=1e-9, abs=1e-9)


@given(
    st.floats(-10, 10),
    st.floats(0.01, 10),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_monotone_in_p_alpha(pg, span, u1, u2):
    pb = pg + span
    lo, hi = sorted((u1, u2))
    if hi - lo < 1e-6:
        return
    assert p_indicator(pg + lo * span, pb, pg) < p_indicator(pg + hi * span, pb, pg)


def test_uniform_baseline_million():
    v = np.random.default_rng(3).uniform(size=10**6)
    assert abs(indicator_exact(FieldSnapshot.from_array(v)).value - UNIFORM_P) <= 0.005


def test_csv_round_trip():
    f = FieldSnapshot.from_array(np.random.default_rng(4).normal(size=500), step=12)
    points = [
        indicator_exact(f),
        indicator_sampled(f, budget=SampleBudget.of_size(100), seed=3),
        evaluate(FieldSnapshot.from_array(np.ones(5), step=13), exact=True),
    ]
    text = series_to_csv(points)
    assert text.splitlines()[0] == "step,P,p_alpha,p_beta,p_gamma,mode,k,seed"
    back = series_from_csv(text)
    assert back[0] == points[0] and back[1] == points[1]
    assert back[2].value is None and back[2].step == 13
