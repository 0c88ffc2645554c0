"""Invariant P-values for model checking.

A density-based P-value ``P(f_T(T) <= f_T(t0))`` changes when the statistic
``T`` is reparametrised.  Dividing out the volume distortion of ``T`` gives
the corrected density ``f*_T`` whose P-value does not.  This package
computes such P-values exactly for discrete and closed-form cases, by
Monte Carlo with weighted kernel density estimates for normality checks,
and by quadrature for location-scale models.
"""

from .core import (MonteCarloConfig, NumericalError, PValueReport, Sample, SingularFiberError,
                   ValidationError, validate_sample)
from .discrete import FinitePmf, discrete_pvalue, pushforward
from .discretization import Partition1D, continuous_density_pvalue, partition_pvalue
from .closed_forms import (chisq_invariant_pvalue, chisq_measured_pvalue, jb_asymptotic_pvalue,
                           mean_stat_pvalue)
from .estimate import WeightedDraws, invariant_pvalue_mc, plain_pvalue_mc, tail_pvalue_mc, weighted_kde
from .normality_check import NormalCheckRequest, alpha_contour_t3t4, check_normal
from .loc_scale import LocScaleModel, ancillary_u, fstar_u, loc_scale_pvalue

__version__ = "0.1.0"

__all__ = [
    "MonteCarloConfig", "NumericalError", "PValueReport", "Sample", "SingularFiberError",
    "ValidationError", "validate_sample", "FinitePmf", "discrete_pvalue", "pushforward",
    "Partition1D", "continuous_density_pvalue", "partition_pvalue", "chisq_invariant_pvalue",
    "chisq_measured_pvalue", "jb_asymptotic_pvalue", "mean_stat_pvalue", "WeightedDraws",
    "invariant_pvalue_mc", "plain_pvalue_mc", "tail_pvalue_mc", "weighted_kde",
    "NormalCheckRequest", "alpha_contour_t3t4", "check_normal", "LocScaleModel", "ancillary_u",
    "fstar_u", "loc_scale_pvalue",
]
