"""Discrepancy statistics and their volume-distortion factors.

For a smooth statistic ``T`` the pushforward density at ``t`` integrates the
base density over the fibre ``T^{-1}{t}`` weighted by
``J_T(x) = |det(dT(x) dT(x)')|^{-1/2}``.  The corrected density drops that
weight, which in simulation amounts to weighting each draw by ``1/J_T``.
Everything here returns the inverse factor ``1/J_T``.

Statistics defined on the residual direction ``d`` are differentiated as
the composed map ``x -> T(d(x))`` in the ambient space, evaluated at a
point with mean 0 and residual norm 1 (so the norm ``r`` is fixed to 1;
it is constant given the sufficient statistic and cancels in P-values).

All functions accept a single point of shape ``(n,)`` or a batch of shape
``(N, n)``.  For a single point a singular fibre point raises
:class:`SingularFiberError`; for batches the factor is ``nan`` there.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .core import NumericalError, SingularFiberError, ValidationError, as_sample
from .sampler import residual_direction

FD_REL_STEP = 1e-5
_SINGULAR_RTOL = 64 * np.finfo(float).eps

SW_METHOD = "Royston (1992/1995) polynomial approximation of the Shapiro-Wilk coefficients"


def power_sum(d: np.ndarray, p: int) -> np.ndarray | float:
    """``sum_i d_i**p`` along the last axis."""
    if p < 1:
        raise ValidationError("power p must be >= 1")
    out = np.sum(np.asarray(d, dtype=float) ** p, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _sums(d: np.ndarray, upto: int) -> list:
    """``[None, T_1, ..., T_upto]`` for the last axis of ``d``."""
    d = np.asarray(d, dtype=float)
    out, pw = [None], np.ones_like(d)
    for _ in range(upto):
        pw = pw * d
        out.append(pw.sum(axis=-1))
    return out


def jarque_bera(d: np.ndarray, n: Optional[int] = None) -> np.ndarray | float:
    """Jarque-Bera statistic ``n (n T3^2 / 6 + (n T4 - 3)^2 / 24)`` of a direction."""
    d = np.asarray(d, dtype=float)
    n = d.shape[-1] if n is None else n
    if n != d.shape[-1]:
        raise ValidationError(f"n={n} does not match direction length {d.shape[-1]}")
    t = _sums(d, 4)
    out = n * (n * t[3] ** 2 / 6.0 + (n * t[4] - 3.0) ** 2 / 24.0)
    return float(out) if np.ndim(out) == 0 else out


def _finish(bracket: np.ndarray, scale: np.ndarray, factor, single: bool):
    singular = bracket <= _SINGULAR_RTOL * scale
    out = factor * np.sqrt(np.where(singular, np.nan, bracket))
    if single:
        if singular:
            raise SingularFiberError("singular fiber point: distortion bracket is not positive")
        return float(out)
    return out


def inv_distortion_power_sum(d: np.ndarray, p: int) -> np.ndarray | float:
    """``p * (T_{2p-2} - T_{p-1}^2 / n - T_p^2)^{1/2}``, the inverse factor of ``T_p o d``.

    ``T_2`` is identically 1 on the sphere, so ``p = 2`` is always singular.
    """
    if p < 2:
        raise ValidationError("p must be >= 2")
    d = np.asarray(d, dtype=float)
    n = d.shape[-1]
    t = _sums(d, 2 * p - 2)
    a, b, c = t[2 * p - 2], t[p - 1] ** 2 / n, t[p] ** 2
    return _finish(a - b - c, np.abs(a) + b + c, float(p), d.ndim == 1)


def _jb_bracket(d: np.ndarray):
    n = d.shape[-1]
    t = _sums(d, 6)
    t3, t4, t5, t6 = t[3], t[4], t[5], t[6]
    a = n * t4 / 3.0 - 1.0
    q = t3 ** 2 + n * t4 ** 2 / 3.0 - t4
    terms = (a * a * t6, 2.0 * a * t3 * t5, -q * q, t3 ** 2 * t4, -n * t3 ** 2 * t4 ** 2 / 9.0)
    # Magnitude bound that also covers cancellation inside a and q (both
    # vanish at the JB minimum), so the singular test is scale-aware there.
    am = n * np.abs(t4) / 3.0 + 1.0
    qm = t3 ** 2 + n * t4 ** 2 / 3.0 + np.abs(t4)
    scale = am * am * np.abs(t6) + 2.0 * am * np.abs(t3 * t5) + qm * qm + np.abs(terms[3]) + np.abs(terms[4])
    return sum(terms), scale


def inv_distortion_jarque_bera(d: np.ndarray, n: Optional[int] = None) -> np.ndarray | float:
    """Inverse distortion ``n^2 * sqrt(bracket)`` of the Jarque-Bera statistic.

    ``bracket`` is the degree-8 polynomial
    ``(nT4/3 - 1)^2 T6 + 2(nT4/3 - 1) T3 T5 - (T3^2 + nT4^2/3 - T4)^2
    + T3^2 T4 - n T3^2 T4^2 / 9``, i.e. the squared norm of the projected
    gradient ``n^2 (T3 d^2 + (nT4/3 - 1) d^3)``.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[-1] if n is None else n
    if n != d.shape[-1]:
        raise ValidationError(f"n={n} does not match direction length {d.shape[-1]}")
    bracket, scale = _jb_bracket(d)
    return _finish(bracket, scale, float(n) ** 2, d.ndim == 1)


def _gram_power(t: list, p: int, q: int, n: int):
    return p * q * (t[p + q - 2] - t[p - 1] * t[q - 1] / n - t[p] * t[q])


def _gram_bound(t: list, p: int, q: int, n: int):
    return p * q * (np.abs(t[p + q - 2]) + np.abs(t[p - 1] * t[q - 1]) / n + np.abs(t[p] * t[q]))


def inv_distortion_t3t4(d: np.ndarray) -> np.ndarray | float:
    """``sqrt(det G)`` for the pair ``(T3, T4) o d``; ``G`` is the 2x2 Gram matrix of gradients."""
    d = np.asarray(d, dtype=float)
    n = d.shape[-1]
    t = _sums(d, 6)
    g33, g44, g34 = _gram_power(t, 3, 3, n), _gram_power(t, 4, 4, n), _gram_power(t, 3, 4, n)
    det = g33 * g44 - g34 ** 2
    b33, b44, b34 = _gram_bound(t, 3, 3, n), _gram_bound(t, 4, 4, n), _gram_bound(t, 3, 4, n)
    return _finish(det, b33 * b44 + b34 ** 2, 1.0, d.ndim == 1)


# --- Shapiro-Wilk -----------------------------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


@lru_cache(maxsize=64)
def shapiro_wilk_coefficients(n: int) -> np.ndarray:
    """Antisymmetric Shapiro-Wilk weights ``a`` (ascending order, ``sum a^2 = 1``)."""
    if not 3 <= n <= 5000:
        raise ValidationError("Shapiro-Wilk needs 3 <= n <= 5000")
    if n == 3:
        a = np.array([-np.sqrt(0.5), 0.0, np.sqrt(0.5)])
        a.setflags(write=False)
        return a
    i = np.arange(1, n + 1)
    m = stats.norm.ppf((i - 0.375) / (n + 0.25))
    mm = float(m @ m)
    u = 1.0 / np.sqrt(n)
    a = np.empty(n)
    an = m[-1] / np.sqrt(mm) + np.polyval(_C1[::-1], u)
    if n > 5:
        an1 = m[-2] / np.sqrt(mm) + np.polyval(_C2[::-1], u)
        phi = (mm - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an ** 2 - 2 * an1 ** 2)
        a[2:-2] = m[2:-2] / np.sqrt(phi)
        a[-1], a[-2], a[0], a[1] = an, an1, -an, -an1
    else:
        phi = (mm - 2 * m[-1] ** 2) / (1 - 2 * an ** 2)
        a[1:-1] = m[1:-1] / np.sqrt(phi)
        a[-1], a[0] = an, -an
    a.setflags(write=False)
    return a


def _sw(x: np.ndarray) -> np.ndarray:
    a = shapiro_wilk_coefficients(x.shape[-1])
    xs = np.sort(x, axis=-1)
    c = x - x.mean(axis=-1, keepdims=True)
    return (xs @ a) ** 2 / np.sum(c * c, axis=-1)


def shapiro_wilk(x) -> float:
    """Shapiro-Wilk ``W`` of a sample (coefficients: see :data:`SW_METHOD`)."""
    s = as_sample(x)
    if np.ptp(s.values) == 0:
        raise ValidationError("degenerate sample: all observations equal")
    return float(_sw(s.values))


def shapiro_wilk_batch(x: np.ndarray) -> np.ndarray:
    """``W`` for each row of ``x`` (no validation)."""
    return _sw(np.asarray(x, dtype=float))


# --- statistic definitions and the generic fallback --------------------------

@dataclass(frozen=True)
class StatisticDef:
    """A discrepancy statistic.

    ``eval`` maps an array ``(..., n)`` to ``(...)`` (``dim_out == 1``) or
    ``(..., 2)``.  When ``on_direction`` is true, ``eval`` expects unit
    residual directions and the distortion is that of ``x -> eval(d(x))``.
    ``inverse_distortion`` is the analytic ``1/J_T`` if one is known.
    """

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    dim_out: int = 1
    on_direction: bool = True
    inverse_distortion: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def composed(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.eval(residual_direction(x) if self.on_direction else x)

    def weights(self, d: np.ndarray) -> np.ndarray:
        """``1/J_T`` at ambient points ``d`` (analytic if available)."""
        if self.inverse_distortion is not None:
            return self.inverse_distortion(d)
        return generic_inverse_distortion(self, d)


def fd_steps(x: np.ndarray) -> np.ndarray:
    return FD_REL_STEP * (1.0 + np.abs(x))


def generic_inverse_distortion(stat: StatisticDef, x: np.ndarray,
                               step: Optional[float | np.ndarray] = None) -> np.ndarray | float:
    """``|det(dT dT')|^{1/2}`` from central finite differences.

    The default step for coordinate ``j`` is ``1e-5 * (1 + |x_j|)``.  For
    ``dim_out == 1`` the result is the gradient norm.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    n = xb.shape[-1]
    h = fd_steps(xb) if step is None else np.broadcast_to(np.asarray(step, dtype=float), xb.shape)
    cols = []
    for j in range(n):
        up, dn = xb.copy(), xb.copy()
        up[:, j] += h[:, j]
        dn[:, j] -= h[:, j]
        # Use the realised step so rounding of x + h does not bias the quotient.
        hj = up[:, j] - dn[:, j]
        diff = np.asarray(stat.composed(up)) - np.asarray(stat.composed(dn))
        cols.append(diff / (hj if diff.ndim == 1 else hj[:, None]))
    grad = np.stack(cols, axis=-1)  # (N, n) or (N, dim_out, n)
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite finite differences")
    if grad.ndim == 2:
        out = np.sqrt(np.sum(grad * grad, axis=-1))
    else:
        gram = grad @ np.swapaxes(grad, -1, -2)
        out = np.sqrt(np.abs(np.linalg.det(gram)))
    return float(out[0]) if single else out


def _t3t4(d):
    t = _sums(d, 4)
    return np.stack([t[3], t[4]], axis=-1)


JARQUE_BERA = StatisticDef("jb", jarque_bera, 1, True, inv_distortion_jarque_bera)
T3T4 = StatisticDef("t3t4", _t3t4, 2, True, inv_distortion_t3t4)
SHAPIRO_WILK = StatisticDef("sw", shapiro_wilk_batch, 1, True, None)


def power_sum_statistic(p: int) -> StatisticDef:
    return StatisticDef(f"t{p}", lambda d: power_sum(d, p), 1, True,
                        lambda d: inv_distortion_power_sum(d, p))


def transformed(stat: StatisticDef, w: Callable[[np.ndarray], np.ndarray], name: str) -> StatisticDef:
    """``W o T`` for a smooth one-to-one ``W``; distortion by finite differences."""
    if stat.dim_out != 1:
        raise ValidationError("transformed() supports scalar statistics only")
    return StatisticDef(name, lambda d: w(stat.eval(d)), 1, stat.on_direction, None)
