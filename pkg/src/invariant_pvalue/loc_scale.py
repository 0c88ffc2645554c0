"""Model checks for location-scale families through the maximal invariant.

For ``x = mu 1 + sigma z`` with ``z`` having i.i.d. density ``f``, the
configuration ``u = (x - median) / IQR`` is ancillary.  Its fibre is the
half-plane ``{a 1 + c u : c > 0}``, and the corrected density of ``u`` is
proportional to

    F(u) = int_0^inf int_R prod_i f(a + c u_i) da dc,

the same for every ``(mu, sigma)`` up to a common factor.  The P-value is
the model probability that ``F(U) <= F(u0)``, estimated by simulating
``U`` at ``(mu, sigma) = (0, 1)``.

Quartile convention: ``q1`` and ``q3`` are the medians of the lower and
upper halves of the sorted sample, the overall median excluded when ``n``
is odd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special

from .core import (MIN_REPORTED_N_SIM, MonteCarloConfig, NumericalError, PValueReport,
                   Sample, ValidationError, as_sample, map_chunks)

DEFAULT_N_SIM = 2000
QUAD_RTOL = 1e-10
TAIL_RTOL = 1e-10
CANONICAL_BITS = 30

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LocScaleModel:
    """Base density for ``z``: one of normal, student_t (needs ``df``), laplace, logistic."""

    base: str = "normal"
    df: float | None = None

    def __post_init__(self):
        if self.base not in _LOGPDF:
            raise ValidationError(f"unknown base density {self.base!r}; choose from {sorted(_LOGPDF)}")
        if self.base == "student_t" and not (self.df is not None and self.df > 0):
            raise ValidationError("student_t needs a positive df")
        _check_mass(self.base, self.df)

    @property
    def label(self) -> str:
        return f"student_t({self.df:g})" if self.base == "student_t" else self.base

    def logpdf(self, z):
        return _LOGPDF[self.base](np.asarray(z, dtype=float), self.df)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.base == "normal":
            return rng.standard_normal(size)
        if self.base == "student_t":
            return rng.standard_t(self.df, size)
        if self.base == "laplace":
            return rng.laplace(0.0, 1.0, size)
        return rng.logistic(0.0, 1.0, size)


def _t_logpdf(z, df):
    const = special.gammaln((df + 1) / 2) - special.gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    return const - (df + 1) / 2 * np.log1p(z * z / df)


_LOGPDF: dict[str, Callable] = {
    "normal": lambda z, df: -0.5 * z * z - _LOG_SQRT_2PI,
    "student_t": _t_logpdf,
    "laplace": lambda z, df: -np.abs(z) - math.log(2.0),
    "logistic": lambda z, df: -np.abs(z) - 2.0 * np.log1p(np.exp(-np.abs(z))),
}


def _py_integrand(base: str):
    def f(v, s, h, shift, param, *u):
        z = [v * (s + ui) / h for ui in u]
        if base == "logistic":
            acc = sum(-abs(x) - 2.0 * math.log1p(math.exp(-abs(x))) for x in z)
        else:
            const = (math.lgamma((param + 1) / 2) - math.lgamma(param / 2)
                     - 0.5 * math.log(param * math.pi))
            acc = sum(const - (param + 1) / 2 * math.log1p(x * x / param) for x in z)
        return v * math.exp(acc - shift)
    return f


@lru_cache(maxsize=None)
def _scale_integrand(base: str):
    """``v * exp(sum_i log f(v (s + u_i) / h) - shift)``, compiled when numba is available.

    Arguments after ``v`` are ``s, h, shift, param, u_1..u_n``.
    """
    try:
        from numba import cfunc, types
        from scipy import LowLevelCallable
    except ImportError:  # pragma: no cover - numba is optional
        return _py_integrand(base)

    sig = types.double(types.intc, types.CPointer(types.double))
    if base == "logistic":
        @cfunc(sig, cache=False)
        def fn(m, xx):
            v, s, h, shift = xx[0], xx[1], xx[2], xx[3]
            acc = 0.0
            for i in range(5, m):
                z = abs(v * (s + xx[i]) / h)
                acc += -z - 2.0 * math.log1p(math.exp(-z))
            return v * math.exp(acc - shift)
    else:
        @cfunc(sig, cache=False)
        def fn(m, xx):
            v, s, h, shift, df = xx[0], xx[1], xx[2], xx[3], xx[4]
            const = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
            acc = 0.0
            for i in range(5, m):
                z = v * (s + xx[i]) / h
                acc += const - (df + 1) / 2 * math.log1p(z * z / df)
            return v * math.exp(acc - shift)
    return LowLevelCallable(fn.ctypes)


@lru_cache(maxsize=None)
def _check_mass(base: str, df: float | None) -> None:
    logpdf = _LOGPDF[base]
    mass = 2 * integrate.quad(lambda z: math.exp(float(logpdf(np.float64(z), df))), 0.0, np.inf,
                              epsabs=0.0, epsrel=1e-12, limit=200)[0]
    if abs(mass - 1.0) > 1e-8:
        raise ValidationError(f"base density integrates to {mass!r}, not 1")


def _median(s: np.ndarray) -> float:
    m = s.shape[0]
    return float(s[m // 2]) if m % 2 else 0.5 * (float(s[m // 2 - 1]) + float(s[m // 2]))


def quartiles(x: np.ndarray) -> tuple[float, float, float]:
    """``(q1, median, q3)`` under the halves-median convention."""
    s = np.sort(np.asarray(x, dtype=float))
    n = s.shape[0]
    return _median(s[: n // 2]), _median(s), _median(s[(n + 1) // 2:])


def _ancillary(v: np.ndarray) -> np.ndarray:
    q1, med, q3 = quartiles(v)
    if not q3 > q1:
        raise ValidationError("zero interquartile range: ancillary is undefined")
    return (v - med) / (q3 - q1)


def ancillary_u(x: Sample | np.ndarray) -> np.ndarray:
    """``(x - median) / (q3 - q1)``, canonicalised so affine images give identical bits.

    The raw configuration is rounded to a ``2**-30`` grid and standardised
    again, which keeps ``median(u) = 0`` and ``IQR(u) = 1``.
    """
    s = as_sample(x)
    if s.n < 4:
        raise ValidationError("ancillary_u needs n >= 4")
    u = _ancillary(s.values)
    u = _ancillary(np.ldexp(np.rint(np.ldexp(u, CANONICAL_BITS)), -CANONICAL_BITS))
    u.setflags(write=False)
    return u


def normal_inner(u: np.ndarray, c: np.ndarray | float) -> np.ndarray | float:
    """Closed form of ``int_R prod_i phi(a + c u_i) da``."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    s = float(u @ u - u.sum() ** 2 / n)
    return (2 * math.pi) ** (-(n - 1) / 2) / math.sqrt(n) * np.exp(-0.5 * np.square(c) * s)


def inner_integral(u: np.ndarray, c: float, model: LocScaleModel) -> float:
    """``int_R prod_i f(a + c u_i) da`` by adaptive quadrature.

    The integrand peaks in ``[-c max(u), -c min(u)]``; the kinks of
    non-smooth bases sit at ``-c u_i`` and are passed as breakpoints.
    """
    u = np.asarray(u, dtype=float)
    shift = u.shape[0] * float(model.logpdf(0.0))

    def f(a):
        return math.exp(float(np.sum(model.logpdf(a + c * u))) - shift)

    knots = np.unique(-c * u)
    lo, hi = float(knots[0]), float(knots[-1])
    parts = [integrate.quad(f, -np.inf, lo, epsabs=0.0, epsrel=QUAD_RTOL, limit=200),
             integrate.quad(f, hi, np.inf, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)]
    if hi > lo:
        parts.append(integrate.quad(f, lo, hi, points=knots[1:-1] if knots.size > 2 else None,
                                    epsabs=0.0, epsrel=QUAD_RTOL, limit=400))
    val = math.fsum(v for v, _ in parts)
    err = sum(e for _, e in parts)
    if not (val > 0 and err <= 1e-6 * val):
        raise NumericalError(f"location quadrature did not converge (estimate {val}, error {err})")
    return math.exp(shift) * val


def _outer(inner: Callable[[float], float]) -> float:
    """Adaptive quadrature of ``inner`` over ``(0, c_max)``.

    ``c_max`` is the first power of two beyond the peak of ``c * inner(c)``
    where that product has dropped below ``1e-12`` of its peak, which
    leaves a truncated tail well under ``1e-10`` of the total for the
    Gaussian-type decay handled here.
    """
    grid = 2.0 ** np.arange(-6, 40)
    vals = np.array([inner(c) * c for c in grid])
    top = int(np.argmax(vals))
    if not vals[top] > 0:
        raise NumericalError("corrected density integrand vanished everywhere")
    beyond = np.flatnonzero((vals < TAIL_RTOL * 1e-2 * vals[top]) & (np.arange(grid.size) > top))
    if beyond.size == 0:
        raise NumericalError("could not truncate the scale integral")
    c_max = float(grid[beyond[0]])
    c_peak = float(grid[top])
    points = [p for p in (c_peak / 2, c_peak, 2 * c_peak) if p < c_max]
    val, err = integrate.quad(inner, 0.0, c_max, points=points, epsabs=0.0,
                              epsrel=QUAD_RTOL, limit=400)
    if not (val > 0 and err <= 1e-6 * val):
        raise NumericalError(f"scale quadrature did not converge (estimate {val}, error {err})")
    return val


def _log_normal(u: np.ndarray) -> float:
    # Inner integral over the location is Gaussian and done in closed form.
    n = u.shape[0]
    s = float(u @ u - u.sum() ** 2 / n)
    log_c = -(n - 1) / 2 * math.log(2 * math.pi) - 0.5 * math.log(n)
    return log_c + math.log(_outer(lambda c: math.exp(-0.5 * c * c * s)))


def _log_laplace(u: np.ndarray) -> float:
    # With a = c*s the scale integral is exact: F = 2^-n int_R h(s)^-2 ds,
    # h(s) = sum_i |s + u_i| piecewise linear with kinks at -u_i.
    p = np.sort(-u)
    n = p.shape[0]
    total = p.sum()
    h_first = total - n * p[0]
    h_last = n * p[-1] - total
    acc = [1.0 / (n * h_first), 1.0 / (n * h_last)]
    below = 0.0
    for j in range(1, n):
        below += p[j - 1]
        alpha = 2 * j - n
        beta = total - 2 * below
        lo, hi = p[j - 1], p[j]
        if hi <= lo:
            continue
        if alpha == 0:
            acc.append((hi - lo) / beta ** 2)
        else:
            acc.append((1.0 / (alpha * lo + beta) - 1.0 / (alpha * hi + beta)) / alpha)
    return -n * math.log(2.0) + math.log(math.fsum(acc))


def _log_by_location_ratio(u: np.ndarray, model: "LocScaleModel") -> float:
    # a = c*s: F = int_R G(s) ds with G(s) = int_0^inf c prod_i f(c (s + u_i)) dc.
    # The inner variable is rescaled by h(s) = mean |s + u_i| so its mass sits near 1.
    n = u.shape[0]
    shift = n * float(model.logpdf(0.0))
    param = 0.0 if model.df is None else float(model.df)
    integrand = _scale_integrand(model.base)
    tail = tuple(float(v) for v in u)

    def g(s):
        h = float(np.mean(np.abs(s + u)))
        val, err = integrate.quad(integrand, 0.0, np.inf, args=(s, h, shift, param) + tail,
                                  epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
        if err > 1e-6 * val:
            raise NumericalError(f"scale quadrature did not converge at s={s} (error {err})")
        return val / (h * h)

    knots = np.unique(-u)
    pieces = [integrate.quad(g, -np.inf, knots[0], epsabs=0.0, epsrel=QUAD_RTOL, limit=200),
              integrate.quad(g, knots[-1], np.inf, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)]
    pieces += [integrate.quad(g, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
               for lo, hi in zip(knots[:-1], knots[1:])]
    val = math.fsum(v for v, _ in pieces)
    err = sum(e for _, e in pieces)
    if not (val > 0 and err <= 1e-6 * val):
        raise NumericalError(f"location-ratio quadrature did not converge (estimate {val}, error {err})")
    return shift + math.log(val)


def log_fstar_u(u: np.ndarray, model: LocScaleModel) -> float:
    """Logarithm of :func:`fstar_u` (safe against underflow for larger ``n``)."""
    u = np.asarray(u, dtype=float)
    if model.base == "normal":
        return _log_normal(u)
    if model.base == "laplace":
        return _log_laplace(u)
    return _log_by_location_ratio(u, model)


def fstar_u(u: np.ndarray, model: LocScaleModel) -> float:
    """``int_0^inf int_R prod_i f(a + c u_i) da dc`` (the constant ``sqrt(n)`` dropped).

    * normal: the location integral is Gaussian and done in closed form,
      the scale integral by adaptive quadrature on ``(0, c_max)``;
    * laplace: after ``a = c s`` both integrals are elementary;
    * logistic, student_t: after ``a = c s``, adaptive quadrature over the
      scale inside adaptive quadrature over ``s``.
    """
    return math.exp(log_fstar_u(u, model))


@lru_cache(maxsize=16)
def reference_log_fstar(model: LocScaleModel, n: int, config: MonteCarloConfig) -> np.ndarray:
    """``log F(U_i)`` for ``config.n_sim`` simulated configurations (cached)."""

    def chunk(rng, size):
        z = model.sample(rng, (size, n))
        out = np.empty(size)
        for i in range(size):
            try:
                u = _ancillary(z[i])
            except ValidationError:
                out[i] = np.nan
                continue
            out[i] = log_fstar_u(u, model)
        return out

    out = np.concatenate(map_chunks(config, chunk))
    out.setflags(write=False)
    return out


def loc_scale_pvalue(x0: Sample | np.ndarray, model: LocScaleModel | None = None,
                     config: MonteCarloConfig | None = None) -> PValueReport:
    """Invariant P-value of the observed configuration under a location-scale model."""
    model = LocScaleModel() if model is None else model
    config = MonteCarloConfig(n_sim=DEFAULT_N_SIM) if config is None else config
    if config.n_sim < MIN_REPORTED_N_SIM:
        raise ValidationError(f"n_sim must be at least {MIN_REPORTED_N_SIM} for a reported P-value")
    s = as_sample(x0)
    u0 = ancillary_u(s)
    v0 = log_fstar_u(u0, model)
    ref = reference_log_fstar(model, s.n, config)
    ref = ref[~np.isnan(ref)]
    p = float(np.count_nonzero(ref <= v0)) / ref.shape[0]
    se = math.sqrt(p * (1 - p) / ref.shape[0])
    return PValueReport(
        statistic_name=f"ancillary_u[{model.label}]",
        t_observed=float(v0),
        p_invariant=p,
        mc_standard_error=se,
        n=s.n,
        n_sim=config.n_sim,
        seed=config.seed,
        singular_count=int(config.n_sim - ref.shape[0]),
        method="log corrected density of the median/IQR configuration",
        config=config.echo(),
    )
