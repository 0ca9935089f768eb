"""Aggregation of classifiers under the margin assumption, with exact risks on finite supports."""

__version__ = "0.1.0"

from .aggregates import (
    FunctionClass,
    Procedure,
    aerm_weights,
    aew_weights,
    aggregate_rule,
    caew_weights,
    compute_weights,
    entropy_minimizer,
    erm_weights,
)
from .distributions import (
    FiniteDistribution,
    LabeledSample,
    Rule,
    bayes_risk,
    bayes_rule,
    excess_hinge,
    hellinger_sq,
    hellinger_sq_product,
    hinge_risk,
    margin_constant,
    sample,
    zero_one_risk,
)
from .losses import HINGE, ZERO_ONE, Loss, clip, empirical_risk, hinge

__all__ = [
    "FiniteDistribution",
    "FunctionClass",
    "HINGE",
    "LabeledSample",
    "Loss",
    "Procedure",
    "Rule",
    "ZERO_ONE",
    "aerm_weights",
    "aew_weights",
    "aggregate_rule",
    "bayes_risk",
    "bayes_rule",
    "caew_weights",
    "clip",
    "compute_weights",
    "empirical_risk",
    "entropy_minimizer",
    "erm_weights",
    "excess_hinge",
    "hellinger_sq",
    "hellinger_sq_product",
    "hinge",
    "hinge_risk",
    "margin_constant",
    "sample",
    "zero_one_risk",
]
