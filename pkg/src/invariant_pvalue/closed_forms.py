"""Exact reference P-values for statistics with fibre-constant distortion.

When ``J_T`` is constant on each fibre, the corrected density is the plain
density divided by that constant and the invariant P-value has a closed
form.  For ``T(x) = x'x`` with ``x ~ N_k(0, I)`` the comparison function
becomes ``t^{(k-1)/2} e^{-t/2}``; observing a chi-square variable directly
instead gives ``t^{k/2-1} e^{-t/2}``.  Both level sets are found by
bisection around the mode.
"""

from __future__ import annotations

import math

from scipy import stats

from .core import NumericalError, ValidationError

ROOT_ATOL = 1e-12
_MAX_EXPANSIONS = 200


def mean_stat_pvalue(xbar0: float, n: int = 1) -> float:
    """Two-sided P-value ``2 (1 - Phi(sqrt(n) |xbar0|))`` for a N(0, 1) sample mean."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    return float(2.0 * stats.norm.sf(math.sqrt(n) * abs(xbar0)))


def _log_g(t: float, power: float) -> float:
    return power * math.log(t) - 0.5 * t


def _bisect(fn, lo: float, hi: float) -> float:
    """Root of ``fn`` on ``[lo, hi]`` given a sign change; absolute tolerance 1e-12."""
    flo = fn(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if hi - lo <= ROOT_ATOL or mid in (lo, hi):
            return mid
        fm = fn(mid)
        if (fm <= 0) == (flo <= 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise NumericalError("bisection did not converge")


def level_roots(power: float, t0: float) -> tuple[float, float]:
    """Roots ``a < mode < b`` of ``t^power e^{-t/2} = t0^power e^{-t0/2}``.

    The mode is ``2 * power``; one of the returned roots is ``t0`` itself
    exactly.
    """
    if power <= 0:
        raise ValidationError("two roots exist only for a positive power")
    if not t0 > 0:
        raise ValidationError("t0 must be positive")
    mode = 2.0 * power
    level = _log_g(t0, power)

    def fn(t):
        return _log_g(t, power) - level

    # Geometric bracket expansion from the mode in each direction.
    lo = mode / 2.0
    for _ in range(_MAX_EXPANSIONS):
        if fn(lo) <= 0:
            break
        lo /= 2.0
    else:
        raise NumericalError(f"could not bracket the left root below mode {mode}")
    hi = mode * 2.0
    for _ in range(_MAX_EXPANSIONS):
        if fn(hi) <= 0:
            break
        hi *= 2.0
    else:
        raise NumericalError(f"could not bracket the right root above mode {mode}")
    # t0 is one root exactly; only the other needs bisection.
    if t0 < mode:
        return t0, _bisect(fn, mode, hi)
    return _bisect(fn, lo, mode), t0


def _level_set_pvalue(k: int, t0: float, power: float) -> float:
    if k < 1:
        raise ValidationError("degrees of freedom k must be >= 1")
    if not t0 > 0:
        raise ValidationError("t0 must be positive")
    dist = stats.chi2(k)
    if power <= 0:
        # Comparison function is nonincreasing: the level set is a right tail.
        return float(dist.sf(t0))
    if t0 == 2.0 * power:
        return 1.0
    a, b = level_roots(power, t0)
    return float(min(1.0, dist.cdf(a) + dist.sf(b)))


def chisq_invariant_pvalue(k: int, t0: float) -> float:
    """Invariant P-value of ``T = x'x`` for ``x ~ N_k(0, I)``.

    Equals ``P(g(T) <= g(t0))`` with ``g(t) = t^{(k-1)/2} e^{-t/2}``, which is
    the chi-square(1) survival function when ``k = 1`` and two-sided for
    ``k > 1``.
    """
    return _level_set_pvalue(k, t0, (k - 1) / 2.0)


def chisq_measured_pvalue(k: int, t0: float) -> float:
    """P-value when ``T ~ chi2(k)`` is itself the measured variable.

    Uses ``g(t) = t^{k/2-1} e^{-t/2}``; for ``k <= 2`` this is the survival
    function.
    """
    return _level_set_pvalue(k, t0, k / 2.0 - 1.0)


def jb_asymptotic_pvalue(t: float) -> float:
    """``exp(-t/2)``, the chi-square(2) survival function."""
    if t < 0:
        raise ValidationError("Jarque-Bera statistic must be nonnegative")
    return float(math.exp(-0.5 * t))


def jb_asymptotic_quantile(alpha: float) -> float:
    """Value ``q`` with ``exp(-q/2) = alpha``."""
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    return -2.0 * math.log(alpha)
