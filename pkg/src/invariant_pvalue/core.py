"""Shared domain types, validation and reproducible randomness."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Optional, Sequence

import numpy as np

# Reported P-values must rest on at least this many replicates.
MIN_REPORTED_N_SIM = 1000

DEFAULT_N_SIM = 200_000
DEFAULT_CHUNK_SIZE = 10_000
DEFAULT_GRID_SIZE = 512


class ValidationError(ValueError):
    """Input data or configuration violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A numerical routine (root finding, quadrature, ...) failed."""


class SingularFiberError(NumericalError):
    """The volume-distortion factor is undefined at the requested point."""


@dataclass(frozen=True)
class Sample:
    """Finite real observations ``x_1..x_n``; the array is read-only."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.n


def validate_sample(values: Sequence[float] | np.ndarray) -> Sample:
    """Return a :class:`Sample` after checking every entry is finite.

    Raises
    ------
    ValidationError
        If ``values`` is empty, not one-dimensional, or holds a non-finite
        entry (the message names the first offending index).
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"sample must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError("empty sample")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"non-finite value {arr[i]!r} at index {i}")
    arr.setflags(write=False)
    return Sample(arr)


def as_sample(x: Sample | Sequence[float] | np.ndarray) -> Sample:
    return x if isinstance(x, Sample) else validate_sample(x)


@dataclass(frozen=True)
class MonteCarloConfig:
    """Monte-Carlo settings.

    ``chunk_size`` fixes the partition of replicates into substreams; the
    output depends on ``(seed, chunk_size)`` only, never on ``workers``.
    ``grid_size`` is the number of points of a reported 1-D density curve;
    P-values themselves are read from a grid resolved to the bandwidth.
    """

    n_sim: int = DEFAULT_N_SIM
    seed: int = 0
    chunk_size: int = DEFAULT_CHUNK_SIZE
    bandwidth: Optional[float] = None
    grid_size: int = DEFAULT_GRID_SIZE
    workers: int = 1

    def __post_init__(self):
        if int(self.n_sim) < 1:
            raise ValidationError("n_sim must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if int(self.chunk_size) < 1:
            raise ValidationError("chunk_size must be positive")
        if self.bandwidth is not None and not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValidationError("bandwidth must be a positive finite real")
        if int(self.grid_size) < 2:
            raise ValidationError("grid_size must be at least 2")
        if int(self.workers) < 1:
            raise ValidationError("workers must be positive")

    def echo(self) -> dict:
        """Settings that determine results; ``workers`` is left out because it never does."""
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "workers"}

    @property
    def chunk_bounds(self) -> list[tuple[int, int]]:
        """Half-open replicate ranges, one per substream, in order."""
        return [(lo, min(lo + self.chunk_size, self.n_sim))
                for lo in range(0, self.n_sim, self.chunk_size)]


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Generator for substream ``chunk`` of ``seed``.

    The chunk index is mixed into the seed through ``SeedSequence`` spawn
    keys and drives a PCG64 bit generator, so substreams are statistically
    independent and each one is reproducible on its own.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chunk),))
    return np.random.Generator(np.random.PCG64(ss))


def map_chunks(config: MonteCarloConfig, fn: Callable[[np.random.Generator, int], Any]) -> list:
    """Apply ``fn(rng, size)`` to every chunk; results come back in chunk order."""
    jobs = [(chunk_rng(config.seed, i), hi - lo) for i, (lo, hi) in enumerate(config.chunk_bounds)]
    if config.workers == 1 or len(jobs) == 1:
        return [fn(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _check_unit(name: str, value: Optional[float]) -> None:
    if value is None:
        return
    if not (0.0 <= value <= 1.0):
        raise ValidationError(f"{name}={value!r} outside [0, 1]")


@dataclass(frozen=True)
class PValueReport:
    """Output record of a P-value computation.

    Optional fields left as ``None`` are omitted from the JSON form; field
    order in the JSON is the declaration order below.
    """

    statistic_name: str
    t_observed: Any
    p_invariant: float
    p_plain: Optional[float] = None
    p_tail: Optional[float] = None
    p_asymptotic: Optional[float] = None
    mc_standard_error: Optional[float] = None
    n: Optional[int] = None
    n_sim: Optional[int] = None
    seed: Optional[int] = None
    bandwidth: Any = None
    singular_count: Optional[int] = None
    method: Optional[str] = None
    config: Optional[dict] = field(default=None, compare=True)

    def __post_init__(self):
        for name in ("p_invariant", "p_plain", "p_tail", "p_asymptotic"):
            _check_unit(name, getattr(self, name))
        if self.mc_standard_error is not None and not self.mc_standard_error >= 0:
            raise ValidationError("mc_standard_error must be nonnegative")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "PValueReport":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown report fields: {sorted(extra)}")
        kw = dict(data)
        for key in ("t_observed", "bandwidth"):
            if isinstance(kw.get(key), list):
                kw[key] = tuple(kw[key])
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "PValueReport":
        return cls.from_dict(json.loads(text))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: insertion order kept, floats in shortest round-trip form."""
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"
