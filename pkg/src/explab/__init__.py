"""Error exponents for hypothesis testing between mixed memoryless sources."""

from explab.distributions import (
    AlphabetMismatchError,
    Distribution,
    EnumerationTooLargeError,
    MixedSource,
    SequenceType,
    UnsupportedSupportError,
    divergence_variance,
    enumerate_types,
    kl_divergence,
    sequence_log_prob,
    type_class_log_size,
)
from explab.exponents import (
    DisjointSupportError,
    ExponentProfile,
    TestingProblem,
    build_profile,
    canonical_solve,
    compound_r_exponent,
    compound_zero_exponent,
    first_order_exponent,
    hoeffding_exponent,
    second_order_exponent,
    sigma_selector,
)

__version__ = "0.1.0"

__all__ = [
    "AlphabetMismatchError",
    "DisjointSupportError",
    "Distribution",
    "EnumerationTooLargeError",
    "ExponentProfile",
    "MixedSource",
    "SequenceType",
    "TestingProblem",
    "UnsupportedSupportError",
    "build_profile",
    "canonical_solve",
    "compound_r_exponent",
    "compound_zero_exponent",
    "divergence_variance",
    "enumerate_types",
    "first_order_exponent",
    "hoeffding_exponent",
    "kl_divergence",
    "second_order_exponent",
    "sequence_log_prob",
    "sigma_selector",
    "type_class_log_size",
]
