"""Truncated spectral triples on subshift languages.

Languages and their level-lowering tree (:mod:`.words`), subshift generators
(:mod:`.generators`), invariant measures (:mod:`.measures`), the flag of
cylinder-function spaces with its Dirac operator (:mod:`.hilbert`) and the
experiments built on them (:mod:`.analysis`).
"""

from __future__ import annotations

from .errors import (
    InconsistentLanguageError,
    InsufficientDataError,
    InvariantError,
    NotFoundError,
    NumericError,
    PrecisionError,
    SpectralShiftError,
    ValidationError,
)
from .generators import (
    ContinuedFraction,
    SftGraph,
    Substitution,
    cf_convergents,
    from_spec,
    lambda_sequence,
    perron,
    perron_pair,
    standard_words,
    sturmian_factors,
    three_distance_set,
    unbounded_theta,
)
from .hilbert import (
    Dirac,
    LevelFunction,
    TruncatedSpace,
    commutator,
    du_norm,
    eta,
    make_alpha,
    operator_norm,
    project,
    q_projection,
    zeta,
)
from .measures import (
    PARRY_CONVENTION,
    MeasureAssignment,
    empirical_measure,
    parry_measure,
    ratio_R,
    sturmian_measure,
    substitution_measure,
)
from .words import (
    LanguageTable,
    build_language,
    complexity_profile,
    entropy_profile,
    pi,
    project_word,
    return_words,
    special_words,
)

__version__ = "0.1.0"

__all__ = [
    "PARRY_CONVENTION",
    "ContinuedFraction",
    "Dirac",
    "InconsistentLanguageError",
    "InsufficientDataError",
    "InvariantError",
    "LanguageTable",
    "LevelFunction",
    "MeasureAssignment",
    "NotFoundError",
    "NumericError",
    "PrecisionError",
    "SftGraph",
    "SpectralShiftError",
    "Substitution",
    "TruncatedSpace",
    "ValidationError",
    "build_language",
    "cf_convergents",
    "commutator",
    "complexity_profile",
    "du_norm",
    "empirical_measure",
    "entropy_profile",
    "eta",
    "from_spec",
    "lambda_sequence",
    "make_alpha",
    "operator_norm",
    "parry_measure",
    "perron",
    "perron_pair",
    "pi",
    "project",
    "project_word",
    "q_projection",
    "ratio_R",
    "return_words",
    "special_words",
    "standard_words",
    "sturmian_factors",
    "sturmian_measure",
    "substitution_measure",
    "three_distance_set",
    "unbounded_theta",
    "zeta",
]
