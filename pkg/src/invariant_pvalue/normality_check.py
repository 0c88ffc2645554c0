"""Invariant P-value checks of the normal model.

Conditioning a normal sample on its minimal sufficient statistic
``(mean, ||x - mean||)`` leaves the unit residual direction ``d``, which is
uniform on the centred unit sphere whatever the parameters.  A discrepancy
statistic ``T(d)`` is therefore checked by simulating uniform directions,
weighting each draw by the inverse volume distortion of ``x -> T(d(x))``
evaluated at ``x = d`` (mean 0, norm 1) and comparing estimated corrected
densities.

Available statistics are ``jb`` (Jarque-Bera), ``t3t4`` (the pair of third
and fourth power sums) and ``sw`` (Shapiro-Wilk ``W``); any
:class:`~invariant_pvalue.distortion.StatisticDef` on directions also works.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import contourpy
import numpy as np

from .closed_forms import jb_asymptotic_pvalue, jb_asymptotic_quantile
from .core import (MIN_REPORTED_N_SIM, MonteCarloConfig, NumericalError, PValueReport,
                   Sample, ValidationError, as_sample)
from .distortion import JARQUE_BERA, SHAPIRO_WILK, SW_METHOD, T3T4, StatisticDef
from .estimate import (GRID_2D, DensityCurve, WeightedDraws, density_levels,
                       invariant_pvalue_mc, plain_pvalue_mc, tail_pvalue_mc, weighted_kde)
from .sampler import map_directions, standardize

STATISTICS: dict[str, StatisticDef] = {s.name: s for s in (JARQUE_BERA, T3T4, SHAPIRO_WILK)}

# Smallest n per statistic; the degree-8 polynomial distortion of the
# moment statistics needs some room above the sphere's dimension.
MIN_N = {"jb": 8, "t3t4": 8, "sw": 3}

# Fewest draws that must fall below a contour level for it to be resolved.
MIN_TAIL_DRAWS = 20


def resolve_statistic(statistic: str | StatisticDef) -> StatisticDef:
    if isinstance(statistic, StatisticDef):
        if not statistic.on_direction:
            raise ValidationError("normality checks need a statistic defined on residual directions")
        return statistic
    try:
        return STATISTICS[statistic]
    except KeyError:
        raise ValidationError(f"unknown statistic {statistic!r}; choose from {sorted(STATISTICS)}") from None


@dataclass(frozen=True)
class NormalCheckRequest:
    """Data, statistic and Monte-Carlo settings for :func:`check_normal`."""

    data: Sample
    statistic: StatisticDef | str = "jb"
    config: MonteCarloConfig = MonteCarloConfig()

    def __post_init__(self):
        object.__setattr__(self, "data", as_sample(self.data))
        stat = resolve_statistic(self.statistic)
        object.__setattr__(self, "statistic", stat)
        need = MIN_N.get(stat.name, 3)
        if self.data.n < need:
            raise ValidationError(f"statistic {stat.name!r} needs n >= {need}, got {self.data.n}")


@lru_cache(maxsize=32)
def simulate_draws(stat: StatisticDef, n: int, config: MonteCarloConfig) -> WeightedDraws:
    """Statistic values and inverse-distortion weights at ``config.n_sim`` uniform directions.

    Results are cached per ``(statistic, n, config)``: repeated checks with
    the same settings reuse one reference simulation.
    """

    def chunk(d):
        return np.asarray(stat.eval(d), dtype=float), np.asarray(stat.weights(d), dtype=float)

    parts = map_directions(n, config, chunk)
    t = np.concatenate([p[0] for p in parts], axis=0)
    w = np.concatenate([p[1] for p in parts])
    return WeightedDraws.from_raw(t, w)


@lru_cache(maxsize=32)
def reference_density(stat: StatisticDef, n: int, config: MonteCarloConfig) -> tuple[WeightedDraws, DensityCurve]:
    """Cached draws plus their plain and corrected density estimates."""
    draws = simulate_draws(stat, n, config)
    return draws, weighted_kde(draws, config.bandwidth)


def check_normal(request: NormalCheckRequest) -> tuple[PValueReport, DensityCurve]:
    """Invariant, plain and (for ``jb``) tail and asymptotic P-values of the data.

    Returns
    -------
    report : PValueReport
        ``p_invariant`` compares corrected densities, ``p_plain`` compares
        plain densities of the statistic.
    curve : DensityCurve
        The estimated densities the P-values were read from, on the
        bandwidth-resolved grid (see :meth:`DensityCurve.resample` for
        coarser output).
    """
    stat, config = request.statistic, request.config
    if config.n_sim < MIN_REPORTED_N_SIM:
        raise ValidationError(f"n_sim must be at least {MIN_REPORTED_N_SIM} for a reported P-value")
    d0 = standardize(request.data)
    t0 = np.asarray(stat.eval(d0), dtype=float)
    draws, curve = reference_density(stat, request.data.n, config)
    p_inv, se = invariant_pvalue_mc(draws, curve, t0)
    p_plain, _ = plain_pvalue_mc(draws, curve, t0)
    p_tail = p_asym = None
    if stat.name == "jb":
        p_tail, _ = tail_pvalue_mc(draws, float(t0))
        p_asym = jb_asymptotic_pvalue(float(t0))
    if stat.name == "sw":
        method = SW_METHOD
    elif stat.inverse_distortion is not None:
        method = "analytic inverse distortion"
    else:
        method = "finite-difference inverse distortion"
    t_obs = float(t0) if t0.ndim == 0 else tuple(float(v) for v in t0)
    report = PValueReport(
        statistic_name=stat.name,
        t_observed=t_obs,
        p_invariant=p_inv,
        p_plain=p_plain,
        p_tail=p_tail,
        p_asymptotic=p_asym,
        mc_standard_error=se,
        n=request.data.n,
        n_sim=config.n_sim,
        seed=config.seed,
        bandwidth=curve.bandwidth,
        singular_count=draws.singular_count,
        method=method,
        config=config.echo(),
    )
    return report, curve


def jb_ellipse(n: int, alpha: float, points: int = 721) -> np.ndarray:
    """Closed curve ``n (n T3^2/6 + (n T4 - 3)^2/24) = q`` with ``exp(-q/2) = alpha``.

    Parametrised as ``T3 = sqrt(6q) cos(theta) / n`` and
    ``T4 = (3 + sqrt(24q/n) sin(theta)) / n``; the first and last rows
    coincide.
    """
    q = jb_asymptotic_quantile(alpha)
    theta = np.linspace(0.0, 2.0 * math.pi, points)
    t3 = math.sqrt(6.0 * q) * np.cos(theta) / n
    t4 = (3.0 + math.sqrt(24.0 * q / n) * np.sin(theta)) / n
    t3[-1], t4[-1] = t3[0], t4[0]
    return np.column_stack([t3, t4])


@dataclass(frozen=True)
class ContourSet:
    """Level-``alpha`` curves in the ``(T3, T4)`` plane.

    ``invariant`` and ``plain`` are lists of polylines (``(m, 2)`` arrays)
    from the corrected and plain density P-value surfaces; ``jb_asymptotic``
    is the closed JB curve.  ``p_invariant`` and ``p_plain`` hold the
    P-value surfaces on ``curve.grid`` (index order ``[T3, T4]``).
    """

    n: int
    alpha: float
    invariant: list
    plain: list
    jb_asymptotic: np.ndarray
    curve: DensityCurve
    p_invariant: np.ndarray
    p_plain: np.ndarray

    def rows(self):
        """``(curve_id, t3, t4)`` rows for CSV output, polylines in order."""
        named = [(f"invariant_{i}", c) for i, c in enumerate(self.invariant)]
        named += [(f"plain_{i}", c) for i, c in enumerate(self.plain)]
        named.append(("jb_asymptotic", self.jb_asymptotic))
        for name, c in named:
            for t3, t4 in c:
                yield name, float(t3), float(t4)


def pvalue_surface(draws: WeightedDraws, curve: DensityCurve, grid: tuple, which: str) -> np.ndarray:
    """P-value at every point of ``grid``: share of draws whose density does not exceed the value there."""
    levels = density_levels(draws, curve, which)
    pts = np.stack(np.meshgrid(*grid, indexing="ij"), axis=-1)
    return np.searchsorted(levels, curve.interpolate(which, pts), side="right") / draws.n


def _lines(grid: tuple, p: np.ndarray, alpha: float) -> list:
    g1, g2 = grid
    gen = contourpy.contour_generator(g1, g2, p.T, line_type="Separate")
    return [np.asarray(c, dtype=float) for c in gen.lines(alpha)]


def alpha_contour_t3t4(n: int, alpha: float = 0.05, config: MonteCarloConfig | None = None) -> ContourSet:
    """Level-``alpha`` P-value contours of the joint ``(T3, T4)`` check.

    P-values are evaluated on a ``GRID_2D`` x ``GRID_2D`` grid spanning the
    draws padded by three bandwidths, made symmetric in ``T3`` (the
    distribution of ``d`` is sign-symmetric).  Contours are traced on it by
    marching squares.

    Raises
    ------
    ValidationError
        If fewer than ``MIN_TAIL_DRAWS`` draws would lie beyond the level,
        or ``alpha`` is not in ``(0, 1)``.
    """
    config = MonteCarloConfig() if config is None else config
    if n < MIN_N["t3t4"]:
        raise ValidationError(f"t3t4 contours need n >= {MIN_N['t3t4']}")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    if min(alpha, 1 - alpha) * config.n_sim < MIN_TAIL_DRAWS:
        raise ValidationError(
            f"alpha={alpha} is not resolvable with n_sim={config.n_sim} "
            f"(needs at least {MIN_TAIL_DRAWS} draws on each side)")
    draws, fine = reference_density(T3T4, n, config)
    bw = fine.bandwidth
    half = float(np.max(np.abs(draws.t[:, 0]))) + 3 * bw[0]
    grid = (np.linspace(-half, half, GRID_2D),
            np.linspace(draws.t[:, 1].min() - 3 * bw[1], draws.t[:, 1].max() + 3 * bw[1], GRID_2D))
    p_star = pvalue_surface(draws, fine, grid, "star")
    p_plain = pvalue_surface(draws, fine, grid, "plain")
    inv, plain = _lines(grid, p_star, alpha), _lines(grid, p_plain, alpha)
    if not inv or not plain:
        raise NumericalError(f"no level-{alpha} contour found on the grid")
    return ContourSet(n, alpha, inv, plain, jb_ellipse(n, alpha), fine.resample(grid), p_star, p_plain)
