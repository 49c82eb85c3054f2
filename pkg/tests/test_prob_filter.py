import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import poisson_binomial_by_enumeration
from switchrec.prob_filter import (
    ProbFilterParams,
    count_distribution,
    display_probability,
    sample_display,
    starvation_probability,
)
from switchrec.rng import user_stream


def test_reported_operating_point():
    assert display_probability(0.1, 5) == pytest.approx(0.3690, abs=5e-4)
    assert round(display_probability(0.1, 5), 2) == 0.37


@pytest.mark.parametrize("alpha,ns,p", [(0.5, 1, 0.5), (0.25, 2, 0.5)])
def test_trivial_display_probabilities(alpha, ns, p):
    assert display_probability(alpha, ns) == pytest.approx(p, abs=1e-15)


@pytest.mark.parametrize("alpha,ns", [(0.0, 5), (1.5, 5), (0.1, 0), (-0.1, 3), (0.1, 2.5)])
def test_display_probability_domain(alpha, ns):
    with pytest.raises(ValueError):
        display_probability(alpha, ns)


def test_starvation_probability_examples():
    assert starvation_probability(0.5, 3) == 0.125
    assert starvation_probability(0.0, 10) == 1.0
    assert starvation_probability(0.3690, 5) == pytest.approx(0.1, abs=1e-3)
    with pytest.raises(ValueError):
        starvation_probability(1.0, 3)


@settings(max_examples=300)
@given(st.floats(1e-6, 1.0), st.integers(1, 200))
def test_round_trip(alpha, ns):
    assert starvation_probability(display_probability(alpha, ns), ns) == pytest.approx(alpha, abs=1e-9)


def test_params_invariant():
    params = ProbFilterParams.from_alpha(0.1, 5)
    assert params.p == display_probability(0.1, 5)
    with pytest.raises(ValueError):
        ProbFilterParams(0.1, 5, 0.5)
    again = ProbFilterParams.from_p(params.p, 5)
    assert again.alpha == pytest.approx(0.1, abs=1e-12)


def test_sample_display_extremes():
    rng = np.random.default_rng(0)
    items = [("a", 1.0), ("b", 1.0), ("c", 1.0)]
    assert sample_display(items, rng) == ["a", "b", "c"]
    assert sample_display([(i, 0.0) for i, _ in items], rng) == []
    with pytest.raises(ValueError):
        sample_display([("a", 1.2)], rng)


def test_sample_display_is_deterministic_given_seed():
    items = [(f"i{k}", 0.37) for k in range(6)]
    a = [sample_display(items, user_stream(7, "alice")) for _ in range(3)]
    b = [sample_display(items, user_stream(7, "alice")) for _ in range(3)]
    assert a == b


def test_mean_displayed_count():
    rng = np.random.default_rng(2024)
    items = [(f"i{k}", 0.37) for k in range(4)]
    counts = [len(sample_display(items, rng)) for _ in range(100_000)]
    assert np.mean(counts) == pytest.approx(1.48, abs=0.02)


def test_count_distribution_examples():
    assert count_distribution([0.5, 0.5]).pmf == pytest.approx([0.25, 0.5, 0.25], abs=1e-15)
    assert count_distribution([0.2, 0.7]).pmf == pytest.approx(list(poisson_binomial_by_enumeration([0.2, 0.7])), abs=1e-12)
    assert count_distribution([0.2, 0.7]).pmf == pytest.approx([0.24, 0.62, 0.14], abs=1e-12)
    assert count_distribution([0.37] * 4).mean == pytest.approx(1.48, abs=1e-12)
    assert count_distribution([]).pmf == (1.0,)


@settings(max_examples=100)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=10))
def test_count_distribution_matches_enumeration(ps):
    dist = count_distribution(ps)
    assert np.allclose(dist.pmf, poisson_binomial_by_enumeration(ps), atol=1e-9, rtol=0)
    assert dist.mean == pytest.approx(sum(ps), abs=1e-9)


@given(st.floats(0.0, 1.0), st.integers(1, 30))
def test_equal_p_is_binomial(p, m):
    pmf = count_distribution([p] * m).pmf
    binom = [math.comb(m, k) * p**k * (1 - p) ** (m - k) for k in range(m + 1)]
    assert np.allclose(pmf, binom, atol=1e-9, rtol=0)


def test_empirical_starvation_within_binomial_ci():
    alpha, ns, n_users = 0.1, 5, 50_000
    p = display_probability(alpha, ns)
    starved = 0
    for k in range(n_users):
        rng = user_stream(11, f"user{k}", "starvation")
        starved += not any(sample_display([("item", p)], rng) for _ in range(ns))
    lo, hi = stats.binom.interval(0.99, n_users, alpha)
    assert lo <= starved <= hi


def test_pmf_matches_monte_carlo_histogram():
    ps = [0.1, 0.37, 0.5, 0.8, 0.37]
    rng = np.random.default_rng(5)
    items = [(str(k), p) for k, p in enumerate(ps)]
    n = 100_000
    observed = np.bincount([len(sample_display(items, rng)) for _ in range(n)], minlength=len(ps) + 1)
    expected = np.asarray(count_distribution(ps).pmf) * n
    assert expected.min() >= 5
    _, pval = stats.chisquare(observed, expected)
    assert pval > 0.01
