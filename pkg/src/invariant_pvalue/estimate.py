"""Kernel estimates of plain and corrected densities, and Monte-Carlo P-values.

Given draws ``t_i = T(x_i)`` from the model together with inverse
distortion weights ``w_i = 1/J_T(x_i)``,

* ``f_plain(t) = N^-1 sum_i K_h(t - t_i)`` estimates the density of ``T``;
* ``f_star(t) = N^-1 sum_i w_i K_h(t - t_i)`` estimates the corrected
  density ``f_T(t) E[1/J_T | T = t]``.

P-values compare estimated density values at the draws with the value at
the observed statistic.  Densities at the draws are read off the grid by
linear interpolation (the draw's own kernel is included).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from .core import NumericalError, ValidationError

MAX_SINGULAR_FRACTION = 1e-3
KDE_CHUNK = 4096
GRID_2D = 128
# Binned estimator: grid points per bandwidth, kernel truncation (in
# bandwidths; the neglected Gaussian mass is below 1e-14) and grid caps.
FINE_PER_BANDWIDTH = 16
FINE_PER_BANDWIDTH_2D = 4
KERNEL_REACH = 8.0
MAX_FINE_POINTS = 2**24
MAX_FINE_POINTS_2D = 2048
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class WeightedDraws:
    """Statistic values ``t`` (``(N,)`` or ``(N, 2)``) with weights ``w`` (``(N,)``)."""

    t: np.ndarray
    w: np.ndarray
    singular_count: int = 0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if t.ndim not in (1, 2) or (t.ndim == 2 and t.shape[1] != 2):
            raise ValidationError(f"t must have shape (N,) or (N, 2), got {t.shape}")
        if w.shape != (t.shape[0],):
            raise ValidationError("t and w lengths differ")
        if not np.all(np.isfinite(t)):
            raise ValidationError("non-finite statistic values")
        if not (np.all(np.isfinite(w)) and np.all(w >= 0)):
            raise ValidationError("weights must be finite and nonnegative")
        total = t.shape[0] + self.singular_count
        if total and self.singular_count / total > MAX_SINGULAR_FRACTION:
            raise NumericalError(
                f"{self.singular_count} of {total} draws hit singular fiber points "
                f"(more than {MAX_SINGULAR_FRACTION:.1%})")
        t.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_raw(cls, t: np.ndarray, w: np.ndarray) -> "WeightedDraws":
        """Drop draws whose weight is ``nan`` (singular points) and count them."""
        w = np.asarray(w, dtype=float)
        ok = ~np.isnan(w)
        return cls(np.asarray(t)[ok], w[ok], int(np.count_nonzero(~ok)))

    @property
    def n(self) -> int:
        return int(self.t.shape[0])

    @property
    def dim(self) -> int:
        return 1 if self.t.ndim == 1 else 2

    def scaled(self, c: float) -> "WeightedDraws":
        return WeightedDraws(self.t, self.w * c, self.singular_count)


@dataclass(frozen=True)
class DensityCurve:
    """Plain and corrected density estimates on a grid.

    In 1-D ``grid`` is ``(m,)`` and the densities are ``(m,)``; in 2-D
    ``grid`` is a pair of axes and the densities are ``(m1, m2)``.
    """

    grid: np.ndarray | tuple
    f_plain: np.ndarray
    f_star: np.ndarray
    bandwidth: float | tuple

    @property
    def dim(self) -> int:
        return 2 if isinstance(self.grid, tuple) else 1

    def plain_integral(self) -> float:
        if self.dim == 1:
            return float(trapezoid(self.f_plain, self.grid))
        g1, g2 = self.grid
        return float(trapezoid(trapezoid(self.f_plain, g2, axis=1), g1))

    def interpolate(self, which: str, points: np.ndarray) -> np.ndarray:
        values = self.f_star if which == "star" else self.f_plain
        points = np.asarray(points, dtype=float)
        if self.dim == 1:
            return np.interp(points, self.grid, values)
        interp = RegularGridInterpolator(self.grid, values, method="linear",
                                         bounds_error=False, fill_value=None)
        return interp(points)

    def resample(self, grid) -> "DensityCurve":
        """The curve linearly interpolated onto ``grid``.

        ``grid`` is an axis (1-D), a pair of axes (2-D), or an integer
        number of evenly spaced points per axis over the current range.
        """
        if isinstance(grid, (int, np.integer)):
            axes = [self.grid] if self.dim == 1 else list(self.grid)
            new = [np.linspace(a[0], a[-1], int(grid)) for a in axes]
            grid = new[0] if self.dim == 1 else tuple(new)
        if self.dim == 1:
            pts = np.asarray(grid, dtype=float)
        else:
            grid = tuple(np.asarray(g, dtype=float) for g in grid)
            pts = np.stack(np.meshgrid(*grid, indexing="ij"), axis=-1)
        return DensityCurve(grid, self.interpolate("plain", pts), self.interpolate("star", pts),
                            self.bandwidth)

    def covers(self, t0) -> bool:
        if self.dim == 1:
            return bool(self.grid[0] <= t0 <= self.grid[-1])
        (g1, g2), (a, b) = self.grid, t0
        return bool(g1[0] <= a <= g1[-1] and g2[0] <= b <= g2[-1])


def _silverman(x: np.ndarray) -> float:
    n = x.shape[0]
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spreads = [s for s in (sd, float(q75 - q25) / 1.34) if s > 0]
    if not spreads:
        raise ValidationError("zero spread: cannot choose a bandwidth")
    return 0.9 * min(spreads) * n ** (-0.2)


def bandwidth_select(draws: WeightedDraws) -> float | tuple[float, float]:
    """Silverman's rule ``0.9 min(sd, IQR/1.34) N^(-1/5)``, per dimension.

    If the IQR vanishes but the standard deviation does not, the standard
    deviation alone is used.
    """
    if draws.n < 100:
        raise ValidationError("bandwidth selection needs at least 100 draws")
    if draws.dim == 1:
        return _silverman(draws.t)
    return tuple(_silverman(draws.t[:, k]) for k in range(2))


def _kernel(u: np.ndarray, h: float) -> np.ndarray:
    return np.exp(-0.5 * (u / h) ** 2) / (h * _SQRT_2PI)


def kde_values(draws: WeightedDraws, bandwidth, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Plain and weighted kernel sums evaluated directly (no binning) at ``points``."""
    points = np.asarray(points, dtype=float)
    flat = points.reshape(-1) if draws.dim == 1 else points.reshape(-1, 2)
    acc = np.zeros((flat.shape[0], 2))
    for lo in range(0, draws.n, KDE_CHUNK):
        t = draws.t[lo:lo + KDE_CHUNK]
        if draws.dim == 1:
            k = _kernel(flat[:, None] - t[None, :], bandwidth)
        else:
            k = (_kernel(flat[:, None, 0] - t[None, :, 0], bandwidth[0])
                 * _kernel(flat[:, None, 1] - t[None, :, 1], bandwidth[1]))
        acc += k @ np.stack([np.ones(t.shape[0]), draws.w[lo:lo + KDE_CHUNK]], axis=1)
    acc /= draws.n
    shape = points.shape if draws.dim == 1 else points.shape[:-1]
    return acc[:, 0].reshape(shape), acc[:, 1].reshape(shape)


def _check_bandwidth(draws: WeightedDraws, bandwidth):
    if bandwidth is None:
        bandwidth = bandwidth_select(draws)
    if draws.dim == 1:
        bandwidth = float(bandwidth)
        if not (bandwidth > 0 and math.isfinite(bandwidth)):
            raise ValidationError("bandwidth must be positive")
        return bandwidth
    bandwidth = tuple(float(b) for b in np.broadcast_to(bandwidth, (2,)))
    if not all(b > 0 and math.isfinite(b) for b in bandwidth):
        raise ValidationError("bandwidth must be positive")
    return bandwidth


def _axis(t: np.ndarray, h: float, per_h: int, max_points: int):
    """Grid axis over the draws padded by ``KERNEL_REACH`` bandwidths, spacing ``h/per_h`` or coarser."""
    lo = float(t.min()) - KERNEL_REACH * h
    hi = float(t.max()) + KERNEL_REACH * h
    delta = max(h / per_h, (hi - lo) / (max_points - 1))
    m = int(math.ceil((hi - lo) / delta)) + 1
    return lo, delta, m


def _bin(t: np.ndarray, lo: float, delta: float, m: int):
    """Linear binning: lower cell index and the share assigned to the upper neighbour."""
    pos = (t - lo) / delta
    j = np.minimum(np.floor(pos).astype(np.int64), m - 2)
    return j, pos - j


def _taps(h: float, delta: float) -> np.ndarray:
    r = int(math.ceil(KERNEL_REACH * h / delta))
    return _kernel(np.arange(-r, r + 1) * delta, h)


def _binned_1d(draws: WeightedDraws, h: float) -> DensityCurve:
    lo, delta, m = _axis(draws.t, h, FINE_PER_BANDWIDTH, MAX_FINE_POINTS)
    j, frac = _bin(draws.t, lo, delta, m)
    taps = _taps(h, delta)
    out = []
    for mass in (np.ones(draws.n), draws.w):
        binned = np.bincount(j, mass * (1.0 - frac), m) + np.bincount(j + 1, mass * frac, m)
        out.append(ndimage.convolve1d(binned, taps, mode="constant") / draws.n)
    return DensityCurve(lo + delta * np.arange(m), out[0], out[1], h)


def _binned_2d(draws: WeightedDraws, bandwidth: tuple) -> DensityCurve:
    axes, idx, fracs, taps = [], [], [], []
    for k, h in enumerate(bandwidth):
        lo, delta, m = _axis(draws.t[:, k], h, FINE_PER_BANDWIDTH_2D, MAX_FINE_POINTS_2D)
        j, frac = _bin(draws.t[:, k], lo, delta, m)
        axes.append(lo + delta * np.arange(m))
        idx.append(j)
        fracs.append(frac)
        taps.append(_taps(h, delta))
    m1, m2 = axes[0].size, axes[1].size
    out = []
    for mass in (np.ones(draws.n), draws.w):
        binned = np.zeros(m1 * m2)
        for d1 in (0, 1):
            s1 = fracs[0] if d1 else 1.0 - fracs[0]
            for d2 in (0, 1):
                s2 = fracs[1] if d2 else 1.0 - fracs[1]
                flat = (idx[0] + d1) * m2 + idx[1] + d2
                binned += np.bincount(flat, mass * s1 * s2, m1 * m2)
        grid = binned.reshape(m1, m2)
        grid = ndimage.convolve1d(grid, taps[0], axis=0, mode="constant")
        grid = ndimage.convolve1d(grid, taps[1], axis=1, mode="constant")
        out.append(grid / draws.n)
    return DensityCurve(tuple(axes), out[0], out[1], bandwidth)


def weighted_kde(draws: WeightedDraws, bandwidth=None, grid=None) -> DensityCurve:
    """Gaussian (product, in 2-D) kernel estimates of the plain and corrected densities.

    Without ``grid`` the estimates live on a grid fine enough to resolve the
    kernel (``FINE_PER_BANDWIDTH`` points per bandwidth in 1-D,
    ``FINE_PER_BANDWIDTH_2D`` per axis in 2-D) spanning the draws padded by
    ``KERNEL_REACH`` bandwidths.  Draws are linearly binned onto that grid
    and the bins convolved with the kernel truncated at ``KERNEL_REACH``
    bandwidths.  With an explicit ``grid`` the kernel sums are evaluated
    there directly.  Both paths are deterministic.
    """
    bandwidth = _check_bandwidth(draws, bandwidth)
    if grid is None:
        return _binned_1d(draws, bandwidth) if draws.dim == 1 else _binned_2d(draws, bandwidth)
    if draws.dim == 1:
        grid = np.asarray(grid, dtype=float)
        f_plain, f_star = kde_values(draws, bandwidth, grid)
        return DensityCurve(grid, f_plain, f_star, bandwidth)

    g1, g2 = (np.asarray(g, dtype=float) for g in grid)
    plain = np.zeros((g1.size, g2.size))
    star = np.zeros_like(plain)
    for lo in range(0, draws.n, KDE_CHUNK):
        t = draws.t[lo:lo + KDE_CHUNK]
        k1 = _kernel(g1[:, None] - t[None, :, 0], bandwidth[0])
        k2 = _kernel(g2[:, None] - t[None, :, 1], bandwidth[1])
        plain += k1 @ k2.T
        star += (k1 * draws.w[lo:lo + KDE_CHUNK]) @ k2.T
    return DensityCurve((g1, g2), plain / draws.n, star / draws.n, bandwidth)


def _density_at(draws: WeightedDraws, curve: DensityCurve, which: str, t0) -> float:
    pt = np.asarray(t0, dtype=float)
    if curve.covers(t0):
        if curve.dim == 1:
            return float(curve.interpolate(which, pt))
        return float(curve.interpolate(which, pt[None, :])[0])
    # Outside the grid: evaluate the kernel sums directly.
    plain, star = kde_values(draws, curve.bandwidth, pt)
    return float(star if which == "star" else plain)


def _at_draws(draws: WeightedDraws, curve: DensityCurve, which: str) -> np.ndarray:
    values = curve.interpolate(which, draws.t)
    if curve.dim == 1:
        outside = (draws.t < curve.grid[0]) | (draws.t > curve.grid[-1])
    else:
        (g1, g2), t = curve.grid, draws.t
        outside = (t[:, 0] < g1[0]) | (t[:, 0] > g1[-1]) | (t[:, 1] < g2[0]) | (t[:, 1] > g2[-1])
    if np.any(outside):
        plain, star = kde_values(draws, curve.bandwidth, draws.t[outside])
        values[outside] = star if which == "star" else plain
    return values


def _density_pvalue(draws: WeightedDraws, curve: DensityCurve, t0, which: str) -> tuple[float, float]:
    at_draws = _at_draws(draws, curve, which)
    level = _density_at(draws, curve, which, t0)
    p = float(np.count_nonzero(at_draws <= level)) / draws.n
    return p, math.sqrt(p * (1.0 - p) / draws.n)


def invariant_pvalue_mc(draws: WeightedDraws, curve: DensityCurve, t0) -> tuple[float, float]:
    """Share of draws whose corrected density is at most that at ``t0``, with its binomial se."""
    return _density_pvalue(draws, curve, t0, "star")


def plain_pvalue_mc(draws: WeightedDraws, curve: DensityCurve, t0) -> tuple[float, float]:
    """Like :func:`invariant_pvalue_mc` but with the uncorrected density."""
    return _density_pvalue(draws, curve, t0, "plain")


def tail_pvalue_mc(draws: WeightedDraws, t0: float) -> tuple[float, float]:
    """Share of draws with ``t >= t0``."""
    if draws.dim != 1:
        raise ValidationError("tail P-value needs a scalar statistic")
    p = float(np.count_nonzero(draws.t >= t0)) / draws.n
    return p, math.sqrt(p * (1.0 - p) / draws.n)


def density_levels(draws: WeightedDraws, curve: DensityCurve, which: str = "star") -> np.ndarray:
    """Estimated density values at every draw (sorted ascending)."""
    return np.sort(_at_draws(draws, curve, which))
