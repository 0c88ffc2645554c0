import math

import numpy as np
import pytest
from scipy import integrate, stats

from invariant_pvalue.core import MonteCarloConfig, ValidationError
from invariant_pvalue.loc_scale import (LocScaleModel, ancillary_u, fstar_u, inner_integral,
                                        loc_scale_pvalue, log_fstar_u, normal_inner, quartiles)
from invariant_pvalue.normality_check import NormalCheckRequest, check_normal

NORMAL = LocScaleModel("normal")
LS_CONFIG = MonteCarloConfig(n_sim=2000, seed=7)


def brute_force_fstar(u, model):
    """Nested adaptive quadrature of prod f(a + c u_i) over a in R, c > 0."""
    u = np.asarray(u)
    pdf = {"normal": stats.norm.pdf, "laplace": stats.laplace.pdf, "logistic": stats.logistic.pdf,
           "student_t": lambda z: stats.t.pdf(z, model.df)}[model.base]
    f = lambda a, c: float(np.prod(pdf(a + c * u)))

    def inner(c):
        # Split at the kinks -c u_i of non-smooth bases.
        edges = [-np.inf, *sorted(set(-c * u)), np.inf]
        return math.fsum(integrate.quad(f, lo, hi, args=(c,), epsabs=0, epsrel=1e-11, limit=200)[0]
                         for lo, hi in zip(edges, edges[1:]))

    return integrate.quad(inner, 0, np.inf, epsabs=0, epsrel=1e-10, limit=500)[0]


def test_quartile_convention_even_n():
    assert quartiles(np.array([1.0, 2.0, 3.0, 4.0])) == (1.5, 2.5, 3.5)


def test_quartile_convention_odd_n_excludes_median():
    assert quartiles(np.array([5.0, 1.0, 4.0, 2.0, 3.0])) == (1.5, 3.0, 4.5)


@pytest.mark.parametrize("x", [[1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 1.0], [3.0, -1.0, 8.0, 2.5, 0.1, 7.7, -4.0]])
def test_ancillary_invariants(x):
    u = ancillary_u(x)
    q1, med, q3 = quartiles(u)
    assert abs(med) <= 1e-12
    assert abs(q3 - q1 - 1) <= 1e-12


def test_ancillary_hand_example():
    assert ancillary_u([1.0, 2.0, 3.0, 4.0]).tolist() == [-0.75, -0.25, 0.25, 0.75]


def test_ancillary_affine_bit_identity(rng):
    x = rng.normal(size=13)
    assert np.array_equal(ancillary_u(x), ancillary_u(7 + 3 * x))


def test_ancillary_rejects_zero_iqr_and_short_samples():
    with pytest.raises(ValidationError, match="interquartile"):
        ancillary_u([1.0, 1.0, 1.0, 1.0, 1.0, 5.0])
    with pytest.raises(ValidationError):
        ancillary_u([1.0, 2.0, 3.0])


@pytest.mark.parametrize("base, df", [("normal", None), ("laplace", None), ("logistic", None), ("student_t", 5.0)])
def test_models_have_unit_mass(base, df):
    m = LocScaleModel(base, df)
    mass = integrate.quad(lambda z: math.exp(float(m.logpdf(z))), -np.inf, np.inf, epsabs=0, epsrel=1e-12)[0]
    assert abs(mass - 1) < 1e-8


@pytest.mark.parametrize("kwargs", [dict(base="cauchy"), dict(base="student_t"), dict(base="student_t", df=-1.0)])
def test_invalid_models(kwargs):
    with pytest.raises(ValidationError):
        LocScaleModel(**kwargs)


def test_normal_inner_closed_form_matches_quadrature(rng):
    u = ancillary_u(rng.normal(size=9))
    for c in (0.01, 0.3, 1.0, 3.0):
        assert inner_integral(u, c, NORMAL) == pytest.approx(normal_inner(u, c), rel=1e-8)


@pytest.mark.parametrize("base, df", [("normal", None), ("laplace", None), ("logistic", None), ("student_t", 4.0)])
def test_fstar_matches_brute_force(rng, base, df):
    model = LocScaleModel(base, df)
    u = ancillary_u(rng.normal(size=6))
    assert fstar_u(u, model) == pytest.approx(brute_force_fstar(u, model), rel=1e-6)


@pytest.mark.parametrize("base, df", [("normal", None), ("laplace", None), ("logistic", None), ("student_t", 3.0)])
def test_fstar_positive(rng, base, df):
    u = ancillary_u(rng.standard_t(2, size=8))
    assert fstar_u(u, LocScaleModel(base, df)) > 0


def test_log_fstar_survives_large_n(rng):
    u = ancillary_u(rng.normal(size=400))
    v = log_fstar_u(u, NORMAL)
    assert math.isfinite(v) and v < -300  # fstar itself underflows here


def test_affine_images_give_identical_reports(rng):
    x = rng.normal(size=10)
    for model in (NORMAL, LocScaleModel("laplace")):
        assert loc_scale_pvalue(x, model, LS_CONFIG).to_json() == loc_scale_pvalue(-3 + 40 * x, model, LS_CONFIG).to_json()


def test_report_fields(rng):
    r = loc_scale_pvalue(rng.normal(size=10), NORMAL, LS_CONFIG)
    assert 0 <= r.p_invariant <= 1
    assert r.mc_standard_error == pytest.approx(math.sqrt(r.p_invariant * (1 - r.p_invariant) / 2000))
    assert r.statistic_name == "ancillary_u[normal]" and r.config["n_sim"] == 2000


def test_needs_reportable_n_sim(rng):
    with pytest.raises(ValidationError):
        loc_scale_pvalue(rng.normal(size=10), NORMAL, MonteCarloConfig(n_sim=100))


@pytest.mark.parametrize("base", ["normal", "laplace"])
def test_calibration_under_the_model(base):
    model = LocScaleModel(base)
    rng = np.random.default_rng(31)
    ps = np.array([loc_scale_pvalue(model.sample(rng, 9), model, LS_CONFIG).p_invariant for _ in range(200)])
    assert abs(np.mean(ps <= 0.05) - 0.05) <= 0.03


def test_gross_outlier_gets_smaller_pvalue():
    outlier = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 60.0])
    good = np.random.default_rng(32).normal(size=9)
    assert loc_scale_pvalue(outlier, NORMAL, LS_CONFIG).p_invariant < loc_scale_pvalue(good, NORMAL, LS_CONFIG).p_invariant


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="for the normal base F(u) depends on u only through sd/IQR, a different "
                                       "discrepancy from JB or W; measured Spearman 0.28 (jb), 0.02 (sw)")
@pytest.mark.parametrize("stat", ["jb", "sw"])
def test_rank_agreement_with_normality_check(stat):
    rng = np.random.default_rng(7)
    datasets = [rng.normal(size=20) for _ in range(50)]
    a = [loc_scale_pvalue(x, NORMAL, LS_CONFIG).p_invariant for x in datasets]
    b = [check_normal(NormalCheckRequest(x, stat, MonteCarloConfig(n_sim=20_000, seed=7)))[0].p_invariant
         for x in datasets]
    assert stats.spearmanr(a, b).statistic > 0.9
