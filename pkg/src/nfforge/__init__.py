"""Exact geometric linearization of integrable vector-field jets, with numeric checks."""
from .config import NumericConfig
from .integrability import (
    IntegrableSystem,
    adapt_integrals,
    check_integrability,
    check_nondegeneracy,
    reduce_zero_block,
    singular_locus_2d,
)
from .invariants import express_in_invariants, hilbert_basis, invariant_generators
from .normalform import (
    GeometricNormalForm,
    HypothesisViolation,
    ObstructionNonzero,
    factor_extract,
    first_integral_transport,
    geometric_normalize,
    pd_step,
    verify_normal_form,
)
from .series import (
    PolyMap,
    TruncatedSeries,
    VectorFieldJet,
    compose_series,
    invert_map,
    lie_bracket,
    lie_derivative,
    mul_truncated,
    pushforward,
)
from .spectrum import Case, SpectrumClass, classify_matrix, classify_spectrum

__version__ = "0.1.0"

__all__ = [
    "NumericConfig",
    "IntegrableSystem",
    "adapt_integrals",
    "check_integrability",
    "check_nondegeneracy",
    "reduce_zero_block",
    "singular_locus_2d",
    "express_in_invariants",
    "hilbert_basis",
    "invariant_generators",
    "GeometricNormalForm",
    "HypothesisViolation",
    "ObstructionNonzero",
    "factor_extract",
    "first_integral_transport",
    "geometric_normalize",
    "pd_step",
    "verify_normal_form",
    "PolyMap",
    "TruncatedSeries",
    "VectorFieldJet",
    "compose_series",
    "invert_map",
    "lie_bracket",
    "lie_derivative",
    "mul_truncated",
    "pushforward",
    "Case",
    "SpectrumClass",
    "classify_matrix",
    "classify_spectrum",
]
