"""Covariance-matrix estimation of bright Gaussian states from Stokes-like measurements."""

from .states import (GaussianParams, MomentForm, ReferenceSpec, NERDecomposition,
                     params_to_moments, moments_to_params, rotate, ner, reference_from_ner)
from .moments import (OrderingConstants, ORDERING, StokesMomentSet, MomentEntry, moment_set,
                      mean_s2, second_s2, mean_s0, second_s0)

__all__ = [
    "GaussianParams", "MomentForm", "ReferenceSpec", "NERDecomposition",
    "params_to_moments", "moments_to_params", "rotate", "ner", "reference_from_ner",
    "OrderingConstants", "ORDERING", "StokesMomentSet", "MomentEntry", "moment_set",
    "mean_s2", "second_s2", "mean_s0", "second_s0",
]
