"""Exact P-values for finite probability functions.

For a discrete statistic the natural P-value is the total probability of
all outcomes that are no more probable than the observed one.  Everything
here is exact enumeration; sums use :func:`math.fsum` so results do not
depend on the order in which the support is listed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Union

from .core import ValidationError

# Truncated countable supports are accepted if the mass is this close to 1.
MASS_TOL = 1e-9
TIE_DIGITS = 12


@dataclass(frozen=True)
class FinitePmf:
    support: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise ValidationError("support and probs differ in length")
        if len(self.support) == 0:
            raise ValidationError("empty support")
        if len(set(self.support)) != len(self.support):
            raise ValidationError("support labels must be distinct")
        for label, p in zip(self.support, self.probs):
            if not (p >= 0.0 and math.isfinite(p)):
                raise ValidationError(f"invalid probability {p!r} for outcome {label!r}")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_mapping(cls, mapping: Mapping[Hashable, float]) -> "FinitePmf":
        return cls(tuple(mapping), tuple(float(p) for p in mapping.values()))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))

    def __getitem__(self, label):
        try:
            return self.probs[self.support.index(label)]
        except ValueError:
            raise KeyError(label) from None

    def __contains__(self, label) -> bool:
        return label in self.support


def pushforward(pmf: FinitePmf,
                t_map: Union[Callable[[Hashable], Hashable], Mapping]) -> FinitePmf:
    """Probability function of ``T(X)`` for ``X ~ pmf``.

    Labels appear in order of first occurrence along ``pmf.support``.
    """
    lookup = t_map.__getitem__ if isinstance(t_map, Mapping) else t_map
    groups: dict = {}
    for x, p in zip(pmf.support, pmf.probs):
        try:
            t = lookup(x)
        except KeyError:
            raise ValidationError(f"t_map is not defined at outcome {x!r}") from None
        groups.setdefault(t, []).append(p)
    return FinitePmf(tuple(groups), tuple(math.fsum(ps) for ps in groups.values()))


def _tie_key(p: float) -> float:
    # Rounded to 12 significant digits so relabelings cannot split tie groups.
    return float(f"{p:.{TIE_DIGITS - 1}e}")


def discrete_pvalue(pmf: FinitePmf, t0: Hashable) -> float:
    """Sum of ``pmf(t)`` over every outcome with ``pmf(t) <= pmf(t0)``."""
    if t0 not in pmf:
        raise ValidationError(f"observed outcome {t0!r} is not in the support")
    level = _tie_key(pmf[t0])
    p = math.fsum(q for q in pmf.probs if _tie_key(q) <= level)
    return min(1.0, p)


def tail_pvalue(pmf: FinitePmf, t0: float) -> float:
    """``P(T >= t0)`` for numeric labels."""
    if t0 not in pmf:
        raise ValidationError(f"observed outcome {t0!r} is not in the support")
    return min(1.0, math.fsum(q for t, q in zip(pmf.support, pmf.probs) if t >= t0))


def truncated(support: Iterable, pmf_fn: Callable[[Hashable], float]) -> FinitePmf:
    """Build a :class:`FinitePmf` by evaluating ``pmf_fn`` over ``support``."""
    support = tuple(support)
    return FinitePmf(support, tuple(float(pmf_fn(s)) for s in support))
