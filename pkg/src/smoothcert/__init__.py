"""Certified-robustness toolkit for randomized-smoothing classifiers.

Computes worst-case certified l2 radii from smoothed-classifier expectation
bounds under four mechanisms and their ensemble, plus simplex sweeps,
dataset-level metrics, Monte-Carlo simulation against analytic classifiers,
a JSON service and a CLI.
"""

__version__ = "0.1.0"

from .confidence import (IntervalSide, RawCounts, SoftmaxSums, beta_interval,
                         bound_multinomial, bound_softmax, hoeffding_halfwidth)
from .core import (GUARD, CertificationOutcome, ExpectationBounds,
                   ExpectationMode, NoiseConfig, NumericError, SimplexPoint,
                   ValidationError, make_bounds)
from .ensemble import (EnsembleConfig, certify_ensemble, default_ensemble,
                       full_ensemble, largest_mechanism, radius_of)
from .mechanisms import (DEFAULT_OPTIMIZER, MECHANISM_ORDER, MechanismId,
                         OptimizerSettings, certify, certify_cohen,
                         certify_improved_dp, certify_lecuyer, certify_li,
                         dp_delta_budget, dp_delta_required, std_normal_cdf,
                         std_normal_quantile)

__all__ = [
    "GUARD", "CertificationOutcome", "DEFAULT_OPTIMIZER", "EnsembleConfig",
    "ExpectationBounds", "ExpectationMode", "IntervalSide", "MECHANISM_ORDER",
    "MechanismId", "NoiseConfig", "NumericError", "OptimizerSettings",
    "RawCounts", "SimplexPoint", "SoftmaxSums", "ValidationError",
    "beta_interval", "bound_multinomial", "bound_softmax", "certify",
    "certify_cohen", "certify_ensemble", "certify_improved_dp",
    "certify_lecuyer", "certify_li", "default_ensemble", "dp_delta_budget",
    "dp_delta_required", "full_ensemble", "hoeffding_halfwidth",
    "largest_mechanism", "make_bounds", "radius_of", "std_normal_cdf",
    "std_normal_quantile",
]
