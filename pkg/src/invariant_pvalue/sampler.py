"""Residual directions on the centred unit sphere.

Under a normal model, ``d(x) = (x - mean(x)) / ||x - mean(x)||`` is uniform
on the unit sphere intersected with the hyperplane orthogonal to ``1_n``,
independently of the sufficient statistic (mean, norm of residual).
Standardising a spherical Gaussian therefore samples that conditional law
directly.

Normal variates come from ``numpy.random.Generator.standard_normal``
(ziggurat) on a PCG64 stream per chunk; see :func:`core.chunk_rng`.
"""

from __future__ import annotations

import numpy as np

from .core import MonteCarloConfig, Sample, ValidationError, as_sample, map_chunks

# Observed directions are snapped to this dyadic grid before use, so data
# that differ only by float rounding of an affine map give identical output.
CANONICAL_BITS = 30


def residual_direction(x: np.ndarray) -> np.ndarray:
    """Raw ``(x - mean) / ||x - mean||`` along the last axis (no checks, no snapping)."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean(axis=-1, keepdims=True)
    return c / np.linalg.norm(c, axis=-1, keepdims=True)


def _snap(d: np.ndarray) -> np.ndarray:
    return np.ldexp(np.rint(np.ldexp(d, CANONICAL_BITS)), -CANONICAL_BITS)


def standardize(x: Sample | np.ndarray) -> np.ndarray:
    """Unit residual direction of a sample.

    The direction is computed, rounded to a ``2**-30`` grid and then
    re-centred and re-normalised; the rounding makes ``standardize(a + c*x)``
    equal ``standardize(x)`` bit for bit even though ``a + c*x`` is itself
    rounded in floating point.

    Raises
    ------
    ValidationError
        If ``n < 3`` or all entries are equal.
    """
    s = as_sample(x)
    if s.n < 3:
        raise ValidationError("standardize needs n >= 3")
    v = s.values
    # Spread far below the float resolution of the values counts as constant.
    if np.ptp(v) <= 64 * np.finfo(float).eps * np.max(np.abs(v)) or np.ptp(v) == 0:
        raise ValidationError("degenerate sample: all observations equal")
    d = residual_direction(_snap(residual_direction(v)))
    d.setflags(write=False)
    return d


def draw_directions(n: int, config: MonteCarloConfig) -> np.ndarray:
    """``config.n_sim`` independent uniform directions, shape ``(n_sim, n)``.

    Chunk ``i`` is generated from substream ``(seed, i)`` and chunks are
    concatenated in order, so the result is independent of ``config.workers``.
    """
    if n < 3:
        raise ValidationError("draw_directions needs n >= 3")

    def one(rng, size):
        return residual_direction(rng.standard_normal((size, n)))

    out = np.concatenate(map_chunks(config, one), axis=0)
    out.setflags(write=False)
    return out


def map_directions(n: int, config: MonteCarloConfig, fn) -> list:
    """Draw directions chunk by chunk and apply ``fn`` to each chunk.

    Same streams as :func:`draw_directions`; avoids holding all draws when
    only per-draw summaries are needed.
    """
    if n < 3:
        raise ValidationError("need n >= 3")
    return map_chunks(config, lambda rng, size: fn(residual_direction(rng.standard_normal((size, n)))))
