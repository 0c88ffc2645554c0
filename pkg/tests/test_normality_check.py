import numpy as np
import pytest
from scipy import stats
from scipy.spatial.distance import directed_hausdorff

from invariant_pvalue.core import MonteCarloConfig, NumericalError, ValidationError
from invariant_pvalue.distortion import JARQUE_BERA, SHAPIRO_WILK, SW_METHOD, StatisticDef, transformed
from invariant_pvalue.estimate import invariant_pvalue_mc, tail_pvalue_mc
from invariant_pvalue.normality_check import (NormalCheckRequest, alpha_contour_t3t4, check_normal,
                                              jb_ellipse, reference_density, simulate_draws)

FAST = MonteCarloConfig(n_sim=20_000, seed=12)


def test_request_resolves_statistic_names():
    req = NormalCheckRequest(np.arange(10.0) ** 2, "sw", FAST)
    assert req.statistic is SHAPIRO_WILK


@pytest.mark.parametrize("stat, n", [("jb", 7), ("t3t4", 7), ("sw", 2)])
def test_request_enforces_minimum_n(stat, n):
    with pytest.raises(ValidationError):
        NormalCheckRequest(np.arange(float(n)) ** 2, stat, FAST)


def test_request_rejects_unknown_statistic():
    with pytest.raises(ValidationError, match="unknown statistic"):
        NormalCheckRequest(np.arange(10.0), "ks", FAST)


def test_request_rejects_statistic_on_raw_data():
    raw = StatisticDef("raw", lambda x: x.sum(axis=-1), 1, False)
    with pytest.raises(ValidationError):
        NormalCheckRequest(np.arange(10.0), raw, FAST)


def test_check_rejects_degenerate_data():
    with pytest.raises(ValidationError, match="degenerate"):
        check_normal(NormalCheckRequest(np.ones(12), "jb", FAST))


def test_check_needs_reportable_n_sim():
    with pytest.raises(ValidationError, match="n_sim"):
        check_normal(NormalCheckRequest(np.arange(10.0) ** 2, "jb", MonteCarloConfig(n_sim=500)))


def test_jb_report_has_all_four_pvalues(rng):
    report, curve = check_normal(NormalCheckRequest(rng.normal(size=20), "jb", FAST))
    for p in (report.p_invariant, report.p_plain, report.p_tail, report.p_asymptotic):
        assert 0.0 <= p <= 1.0
    assert report.p_asymptotic == pytest.approx(np.exp(-report.t_observed / 2), rel=1e-15)
    assert report.method == "analytic inverse distortion"
    assert report.n == 20 and report.n_sim == 20_000 and report.seed == 12
    assert report.mc_standard_error <= 0.5 / np.sqrt(20_000)
    assert report.bandwidth == curve.bandwidth


def test_t3t4_report_carries_a_pair(rng):
    report, curve = check_normal(NormalCheckRequest(rng.normal(size=15), "t3t4", FAST))
    assert isinstance(report.t_observed, tuple) and len(report.t_observed) == 2
    assert report.p_tail is None and curve.dim == 2


def test_sw_report_names_its_coefficients(rng):
    x = rng.normal(size=15)
    report, _ = check_normal(NormalCheckRequest(x, "sw", FAST))
    assert report.method == SW_METHOD
    assert report.t_observed == pytest.approx(stats.shapiro(x).statistic, abs=1e-5)


def test_custom_statistic_uses_finite_differences(rng):
    cubic = transformed(JARQUE_BERA, lambda t: t ** 3 + t, "jb_cubic")
    report, _ = check_normal(NormalCheckRequest(rng.normal(size=12), cubic, FAST))
    assert report.method == "finite-difference inverse distortion"


@pytest.mark.parametrize("stat", ["jb", "t3t4", "sw"])
def test_affine_images_give_identical_reports(rng, stat):
    x = rng.normal(size=14)
    a = check_normal(NormalCheckRequest(x, stat, FAST))[0].to_json()
    b = check_normal(NormalCheckRequest(-11.0 + 0.003 * x, stat, FAST))[0].to_json()
    assert a == b


def test_report_independent_of_worker_count(rng):
    x = rng.normal(size=12)
    a = check_normal(NormalCheckRequest(x, "jb", MonteCarloConfig(n_sim=30_000, seed=4, workers=1)))[0]
    b = check_normal(NormalCheckRequest(x, "jb", MonteCarloConfig(n_sim=30_000, seed=4, workers=3)))[0]
    assert a.to_json() == b.to_json()


def test_reference_simulation_is_cached():
    assert simulate_draws(JARQUE_BERA, 11, FAST) is simulate_draws(JARQUE_BERA, 11, FAST)


def test_null_calibration_jarque_bera():
    rng = np.random.default_rng(91)
    ps = np.array([check_normal(NormalCheckRequest(rng.normal(3.0, 2.0, 20), "jb", FAST))[0].p_invariant
                   for _ in range(200)])
    assert abs(np.mean(ps <= 0.05) - 0.05) <= 0.02
    assert stats.kstest(ps, "uniform").statistic < 0.1


def test_null_calibration_t3t4_ks():
    rng = np.random.default_rng(14)
    ps = [check_normal(NormalCheckRequest(rng.normal(size=20), "t3t4", FAST))[0].p_invariant for _ in range(200)]
    assert stats.kstest(ps, "uniform").statistic < 0.1


def test_joint_check_is_more_powerful_than_asymptotic_jb():
    rng = np.random.default_rng(13)
    joint = asym = 0
    for _ in range(200):
        x = rng.exponential(size=20)
        joint += check_normal(NormalCheckRequest(x, "t3t4", FAST))[0].p_invariant <= 0.05
        asym += check_normal(NormalCheckRequest(x, "jb", FAST))[0].p_asymptotic <= 0.05
    assert joint > asym


@pytest.mark.parametrize("n", [10, 20])
def test_jarque_bera_density_shape(n):
    draws, curve = reference_density(JARQUE_BERA, n, MonteCarloConfig(n_sim=200_000, seed=1))
    assert draws.t.min() >= 0
    assert draws.t.mean() > np.median(draws.t)
    below = curve.grid < 0
    assert np.trapezoid(curve.f_plain[below], curve.grid[below]) < 0.02  # kernel leakage only


@pytest.mark.parametrize("n", [10, 20])
def test_invariant_pvalue_is_two_sided_in_t0(n):
    draws, curve = reference_density(JARQUE_BERA, n, MonteCarloConfig(n_sim=200_000, seed=1))
    t0s = np.linspace(0.01, 8.0, 80)
    inv = np.array([invariant_pvalue_mc(draws, curve, t0)[0] for t0 in t0s])
    tail = np.array([tail_pvalue_mc(draws, t0)[0] for t0 in t0s])
    assert np.all(np.diff(tail) <= 0)
    peak = int(np.argmax(inv))
    assert 0 < peak < t0s.size - 1
    assert inv[0] < inv[peak] - 0.1 and inv[-1] < inv[peak] - 0.1


def test_shapiro_wilk_weights_nearly_constant_given_w():
    draws = simulate_draws(SHAPIRO_WILK, 20, MonteCarloConfig(n_sim=50_000, seed=2))
    edges = np.quantile(draws.t, np.linspace(0.05, 0.95, 41))
    which = np.digitize(draws.t, edges)
    cvs = [draws.w[which == b].std() / draws.w[which == b].mean() for b in range(1, edges.size)]
    assert max(cvs) < 0.1


@pytest.mark.slow
def test_joint_and_jb_pvalues_converge_with_n():
    cfg = MonteCarloConfig(n_sim=50_000, seed=21)
    gaps = []
    for n in (10, 50, 200):
        rng = np.random.default_rng(23)
        diffs = []
        for _ in range(100):
            x = rng.normal(size=n)
            joint = check_normal(NormalCheckRequest(x, "t3t4", cfg))[0].p_invariant
            tail = check_normal(NormalCheckRequest(x, "jb", cfg))[0].p_tail
            diffs.append(abs(joint - tail))
        gaps.append(np.mean(diffs))
    assert gaps[0] > gaps[1] > gaps[2]


def test_ellipse_is_the_asymptotic_level_curve():
    for n, alpha in ((10, 0.05), (25, 0.01)):
        t3, t4 = jb_ellipse(n, alpha).T
        jb = n * (n * t3 ** 2 / 6 + (n * t4 - 3) ** 2 / 24)
        assert np.allclose(jb, stats.chi2.isf(alpha, 2), rtol=1e-12, atol=0)
    pts = jb_ellipse(10, 0.05)
    assert np.array_equal(pts[0], pts[-1])


@pytest.fixture(scope="module")
def contours():
    return alpha_contour_t3t4(10, 0.05, MonteCarloConfig(n_sim=100_000, seed=10))


def test_contours_are_mirror_symmetric(contours):
    g1, g2 = contours.curve.grid
    assert np.allclose(g1, -g1[::-1], atol=1e-12 * np.abs(g1).max())
    cell = np.array([g1[1] - g1[0], g2[1] - g2[0]])
    for lines in (contours.invariant, contours.plain):
        pts = np.concatenate(lines) / cell
        mirrored = pts * [-1, 1]
        assert max(directed_hausdorff(pts, mirrored)[0], directed_hausdorff(mirrored, pts)[0]) <= 3.0


def test_contour_surface_straddles_alpha(contours):
    assert contours.p_invariant.shape == (128, 128)
    assert contours.p_invariant.min() < 0.05 < contours.p_invariant.max()


def test_contour_rows_cover_every_curve(contours):
    ids = {row[0] for row in contours.rows()}
    assert "jb_asymptotic" in ids
    assert any(i.startswith("invariant_") for i in ids) and any(i.startswith("plain_") for i in ids)


def test_contour_rejects_unresolvable_alpha():
    with pytest.raises(ValidationError, match="resolvable"):
        alpha_contour_t3t4(10, 0.001, MonteCarloConfig(n_sim=10_000, seed=1))
    with pytest.raises(ValidationError):
        alpha_contour_t3t4(10, 1.5, FAST)
    with pytest.raises(ValidationError):
        alpha_contour_t3t4(7, 0.05, FAST)


def test_contour_missing_level_is_a_numerical_error(monkeypatch):
    import invariant_pvalue.normality_check as nc
    monkeypatch.setattr(nc, "_lines", lambda grid, p, alpha: [])
    with pytest.raises(NumericalError):
        nc.alpha_contour_t3t4(10, 0.05, FAST)
