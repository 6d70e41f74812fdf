"""Granularity-based output curve analysis of mode-switching components."""

__version__ = "0.1.0"

from .curves import (
    INF,
    AlphaCurvePair,
    CoarseCurveSet,
    EmptyStreamSet,
    XiCurvePair,
    alpha_from_xi,
    causality_closure,
    combine,
    distance,
    read_curve,
    sample,
    validate,
    write_curve,
    xi_from_alpha,
)
from .engine import analyze_component, analyze_lower, analyze_upper, run_component
from .mta import (
    Kind,
    Mode,
    MtaSpec,
    MtaTransition,
    coarse_thresholds,
    read_mta,
    translate_coarse,
    translate_fine,
    validate_spec,
)

__all__ = [
    "INF", "AlphaCurvePair", "CoarseCurveSet", "EmptyStreamSet", "XiCurvePair", "alpha_from_xi",
    "causality_closure", "combine", "distance", "read_curve", "sample", "validate", "write_curve",
    "xi_from_alpha", "analyze_component", "analyze_lower", "analyze_upper", "run_component",
    "Kind", "Mode", "MtaSpec", "MtaTransition", "coarse_thresholds", "read_mta",
    "translate_coarse", "translate_fine", "validate_spec",
]
