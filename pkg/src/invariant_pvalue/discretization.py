"""Partition-based P-values for a measured scalar and their continuum limit.

A continuous response observed to finite accuracy lands in one cell of an
equal-width partition.  The exact discrete P-value over those cells
converges, as the cells shrink, to ``P(f(X) <= f(x0))``.  This module
computes both sides in one dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .core import NumericalError, ValidationError

TRUNCATION_MASS = 1e-12
# Relative slack when comparing cell masses, so that cells with equal exact
# mass (mirror images, flat densities) are not split by rounding.
CELL_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class Density1D:
    """A univariate density with optional cdf/sf and its list of modes.

    ``support`` is the closed hull of the support and may be infinite; the
    ``bounds`` property gives the truncated working interval holding all but
    ``TRUNCATION_MASS`` of the probability.
    """

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    modes: tuple[float, ...] = ()
    bounds: tuple[float, float] = field(default=None)

    def __post_init__(self):
        lo, hi = self.support
        if self.bounds is None:
            if math.isinf(lo) or math.isinf(hi):
                raise ValidationError("unbounded support needs explicit truncation bounds")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))

    def contains(self, x: float) -> bool:
        lo, hi = self.support
        return lo <= x <= hi

    def mass(self, a, b):
        """Probability of ``(a, b]``, vectorised over arrays ``a`` and ``b``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.cdf is not None:
            right = a >= self.modes[0] if self.modes else np.zeros(a.shape, bool)
            out = np.asarray(self.cdf(b) - self.cdf(a), dtype=float)
            if self.sf is not None and np.any(right):
                out = np.where(right, self.sf(a) - self.sf(b), out)
            return np.clip(out, 0.0, None)
        vals = [integrate.quad(lambda s: float(self.pdf(s)), lo, hi, epsabs=0.0, epsrel=1e-10)[0]
                for lo, hi in zip(np.ravel(a), np.ravel(b))]
        return np.reshape(vals, a.shape)


def _from_scipy(name, dist, support, modes) -> Density1D:
    lo, hi = support
    tail = TRUNCATION_MASS / 2 if math.isinf(lo) and math.isinf(hi) else TRUNCATION_MASS
    if math.isinf(lo):
        lo = dist.ppf(tail)
    if math.isinf(hi):
        hi = dist.isf(tail)
    return Density1D(name, dist.pdf, support, dist.cdf, dist.sf, tuple(modes), (float(lo), float(hi)))


def normal(mu: float = 0.0, sigma: float = 1.0) -> Density1D:
    return _from_scipy("normal", stats.norm(mu, sigma), (-math.inf, math.inf), [mu])


def laplace(mu: float = 0.0, scale: float = 1.0) -> Density1D:
    return _from_scipy("laplace", stats.laplace(mu, scale), (-math.inf, math.inf), [mu])


def uniform(a: float = 0.0, b: float = 1.0) -> Density1D:
    dist = stats.uniform(a, b - a)

    # Closed interval so both endpoints carry the constant density.
    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= a) & (x <= b), 1.0 / (b - a), 0.0)

    return Density1D("uniform", pdf, (a, b), dist.cdf, dist.sf, (), (a, b))


def exponential(rate: float = 1.0) -> Density1D:
    return _from_scipy("exponential", stats.expon(scale=1.0 / rate), (0.0, math.inf), [0.0])


BUILTIN = {"normal": normal, "laplace": laplace, "uniform": uniform, "exponential": exponential}


@dataclass(frozen=True)
class Partition1D:
    """Cells ``((i-1)*width + anchor, i*width + anchor]`` for integer ``i``."""

    width: float
    anchor: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValidationError("cell width must be positive and finite")

    def index(self, x):
        return np.ceil((np.asarray(x, dtype=float) - self.anchor) / self.width).astype(np.int64)

    def cell(self, i):
        i = np.asarray(i)
        return (i - 1) * self.width + self.anchor, i * self.width + self.anchor


def _require_inside(f: Density1D, x: float) -> None:
    if not f.contains(x):
        raise ValidationError(f"x={x!r} is outside the support {f.support} of {f.name}")


def cell_probability(f: Density1D, partition: Partition1D, x: float) -> float:
    """Probability of the partition cell that contains ``x``."""
    _require_inside(f, x)
    lo, hi = partition.cell(partition.index(x))
    return float(f.mass(lo, hi))


def partition_pvalue(f: Density1D, partition: Partition1D, x0: float) -> float:
    """Exact discrete P-value of the cell containing ``x0``.

    Cells are enumerated over the truncated support; the truncated tails
    always qualify (their mass is below any interior cell at practical
    widths) and are added to the total.
    """
    _require_inside(f, x0)
    lo, hi = f.bounds
    i0 = int(partition.index(x0))
    first, last = int(partition.index(lo)), int(partition.index(hi))
    idx = np.arange(first, last + 1)
    a, b = partition.cell(idx)
    # Clip the end cells to the support.
    a = np.maximum(a, f.support[0])
    b = np.minimum(b, f.support[1])
    masses = f.mass(a, b)
    m0 = masses[i0 - first]
    keep = masses <= m0 * (1.0 + CELL_TIE_RTOL)
    tails = 0.0
    if math.isinf(f.support[0]):
        tails += float(f.cdf(a[0]))
    if math.isinf(f.support[1]):
        tails += float(f.sf(b[-1]))
    return float(min(1.0, np.sum(masses[keep]) + tails))


def _level_root(g: Callable[[float], float], a: float, b: float) -> float:
    try:
        return optimize.brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    except ValueError as exc:
        raise NumericalError(f"could not bracket level-set root in [{a}, {b}]: {exc}") from exc


def continuous_density_pvalue(f: Density1D, x0: float) -> float:
    """``P(f(X) <= f(x0))`` from the level set of the density at ``f(x0)``.

    The density is split into monotone pieces at its modes; on each piece the
    crossing with the level is found by root bracketing and the qualifying
    sub-interval's mass is read off the cdf.
    """
    _require_inside(f, x0)
    if f.cdf is None:
        raise ValidationError("continuous_density_pvalue needs a cdf")
    level = float(f.pdf(x0))
    lo, hi = f.support
    blo, bhi = f.bounds
    modes = [m for m in f.modes if lo <= m <= hi]
    if not modes:
        # No interior mode: treat as constant if the density is flat.
        probe = f.pdf(np.linspace(blo, bhi, 65))
        if np.ptp(probe) <= 1e-12 * max(np.max(probe), 1.0):
            return 1.0
        raise ValidationError(f"{f.name}: a mode list is required for non-constant densities")

    def mass(a, b):
        return float(f.mass(a, b)) if b > a else 0.0

    def g(x):
        return float(f.pdf(x)) - level

    # Monotone pieces: rising up to each mode, falling from it to the next
    # antimode (located numerically) or to the end of the support.
    edges = [(lo, +1)]
    for m, m_next in zip(modes, modes[1:] + [None]):
        edges.append((m, -1))
        if m_next is not None:
            res = optimize.minimize_scalar(lambda s: float(f.pdf(s)), bounds=(m, m_next),
                                           method="bounded", options={"xatol": 1e-12})
            edges.append((float(res.x), +1))
    edges.append((hi, 0))

    total = 0.0
    for (a, direction), (b, _) in zip(edges, edges[1:]):
        if b <= a:
            continue
        ta, tb = max(a, blo), min(b, bhi)
        low_end, high_end = (ta, tb) if direction > 0 else (tb, ta)
        if g(high_end) <= 0:
            total += mass(a, b)
        elif g(low_end) > 0:
            continue
        else:
            root = _level_root(g, ta, tb)
            total += mass(a, root) if direction > 0 else mass(root, b)
    return float(min(1.0, total))


def convergence_sweep(f: Density1D, x0: float, widths: Sequence[float],
                      anchor: float = 0.0) -> list[tuple[float, float, float, float]]:
    """Rows ``(width, p_discrete, p_continuous, gap)`` along nested partitions."""
    widths = [float(w) for w in widths]
    for coarse, fine in zip(widths, widths[1:]):
        ratio = coarse / fine
        if fine >= coarse or abs(ratio - round(ratio)) > 1e-9:
            raise ValidationError("widths must be nested refinements (each an integer divisor of the last)")
    p_cont = continuous_density_pvalue(f, x0)
    rows = []
    for w in widths:
        p = partition_pvalue(f, Partition1D(w, anchor), x0)
        rows.append((w, p, p_cont, abs(p - p_cont)))
    return rows
