import math

import numpy as np
import pytest
from scipy import stats

from oracles import chi2_level_set_grid
from invariant_pvalue.closed_forms import (chisq_invariant_pvalue, chisq_measured_pvalue,
                                           jb_asymptotic_pvalue, jb_asymptotic_quantile, level_roots,
                                           mean_stat_pvalue)
from invariant_pvalue.core import MonteCarloConfig, ValidationError, map_chunks
from invariant_pvalue.estimate import WeightedDraws, invariant_pvalue_mc, weighted_kde


@pytest.mark.parametrize("n", [1, 4, 100])
def test_mean_stat_at_zero(n):
    assert mean_stat_pvalue(0.0, n) == 1.0


def test_mean_stat_examples():
    assert mean_stat_pvalue(1.96, 1) == pytest.approx(2 * stats.norm.sf(1.96), rel=1e-14)
    assert mean_stat_pvalue(0.62, 10) == pytest.approx(2 * stats.norm.sf(0.62 * math.sqrt(10)), rel=1e-14)
    assert mean_stat_pvalue(0.62, 10) == pytest.approx(0.05, abs=1e-3)


def test_mean_stat_rejects_bad_n():
    with pytest.raises(ValidationError):
        mean_stat_pvalue(0.1, 0)


def test_chisq_k1_equals_survival():
    for t0 in (0.1, 1.0, 3.8415, 5.0, 10.0):
        assert abs(chisq_invariant_pvalue(1, t0) - stats.chi2.sf(t0, 1)) <= 1e-10
    assert chisq_invariant_pvalue(1, 3.8415) == pytest.approx(0.05, abs=1e-4)


@pytest.mark.parametrize("k", [2, 3, 5, 10])
def test_mode_gives_one(k):
    assert chisq_invariant_pvalue(k, k - 1.0) == 1.0


@pytest.mark.parametrize("k, t0", [(3, 0.35), (3, 9.0), (2, 0.2), (5, 12.0), (6, 1.0)])
def test_invariant_matches_grid_oracle(k, t0):
    assert abs(chisq_invariant_pvalue(k, t0) - chi2_level_set_grid(k, t0, (k - 1) / 2)) < 1e-5


def test_measured_k2_is_exponential_tail():
    for t0 in (0.3, 2.0, 7.5):
        assert chisq_measured_pvalue(2, t0) == pytest.approx(math.exp(-t0 / 2), rel=1e-12)


def test_measured_k1_is_survival():
    assert chisq_measured_pvalue(1, 1.0) == pytest.approx(stats.chi2.sf(1.0, 1), rel=1e-12)
    assert chisq_measured_pvalue(1, 1.0) == pytest.approx(0.3173, abs=1e-4)


def test_measured_k4_matches_grid_oracle():
    assert abs(chisq_measured_pvalue(4, 0.5) - chi2_level_set_grid(4, 0.5, 1.0)) < 1e-5


@pytest.mark.parametrize("k, t0", [(2, 0.3), (3, 0.35), (3, 9.0), (4, 7.0), (7, 1.5), (7, 20.0)])
def test_two_sided_structure(k, t0):
    power = (k - 1) / 2
    a, b = level_roots(power, t0)
    assert a < k - 1 < b
    assert t0 in (a, b)
    g = lambda t: t ** power * math.exp(-t / 2)
    assert abs(g(a) - g(t0)) <= 1e-10 and abs(g(b) - g(t0)) <= 1e-10
    assert chisq_invariant_pvalue(k, t0) == pytest.approx(stats.chi2.cdf(a, k) + stats.chi2.sf(b, k), abs=1e-15)
    assert chisq_invariant_pvalue(k, t0) < 1


@pytest.mark.parametrize("k, t0", [(2, 0.05), (3, 0.35), (3, 9.0), (4, 12.0), (6, 0.5), (6, 15.0)])
def test_invariant_and_measured_disagree(k, t0):
    assert abs(chisq_invariant_pvalue(k, t0) - chisq_measured_pvalue(k, t0)) > 1e-4


def test_jb_asymptotic_examples():
    assert jb_asymptotic_pvalue(0.0) == 1.0
    assert jb_asymptotic_pvalue(5.9915) == pytest.approx(stats.chi2.sf(5.9915, 2), rel=1e-12)
    assert jb_asymptotic_pvalue(2 * math.log(10)) == pytest.approx(0.1, rel=1e-15)


def test_jb_quantile_inverts_pvalue():
    for alpha in (0.01, 0.05, 0.5):
        assert jb_asymptotic_pvalue(jb_asymptotic_quantile(alpha)) == pytest.approx(alpha, rel=1e-14)


@pytest.mark.parametrize("call", [lambda: chisq_invariant_pvalue(0, 1.0), lambda: chisq_invariant_pvalue(3, 0.0),
                                  lambda: chisq_measured_pvalue(3, -1.0), lambda: jb_asymptotic_pvalue(-0.1),
                                  lambda: jb_asymptotic_quantile(1.0), lambda: level_roots(0.0, 1.0)])
def test_invalid_arguments(call):
    with pytest.raises(ValidationError):
        call()


def _bridge_z(k, t0, seed=5, n_sim=200_000):
    config = MonteCarloConfig(n_sim=n_sim, seed=seed)
    x = np.concatenate(map_chunks(config, lambda rng, size: rng.standard_normal((size, k))))
    t = np.einsum("ij,ij->i", x, x)
    draws = WeightedDraws(t, 2 * np.sqrt(t))
    p, se = invariant_pvalue_mc(draws, weighted_kde(draws), t0)
    return (p - chisq_invariant_pvalue(k, t0)) / se


_BOUNDARY = "KDE boundary bias at t = 0 and tail noise exceed the binomial se"
BRIDGE = [pytest.param(k, t0, marks=() if (k, t0) in {(1, 3.0), (5, 5.0)}
                       else pytest.mark.xfail(strict=True, reason=_BOUNDARY))
          for k in (1, 3, 5) for t0 in (0.5, float(k), 3.0 * k)]


@pytest.mark.slow
@pytest.mark.parametrize("k, t0", BRIDGE)
def test_monte_carlo_bridge(k, t0):
    assert abs(_bridge_z(k, t0)) <= 3
