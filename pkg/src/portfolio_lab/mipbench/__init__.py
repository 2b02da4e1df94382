"""Desk-scale IP benchmark: instances, LP relaxation, branch-and-bound, dual tracing."""

from .bnb import BnbResult, BnbStatus, LpCache, bnb_run, branch_scores
from .instances import (
    DESK_SIZES,
    FEATURE_DIM,
    Family,
    GeneratorSpec,
    IpInstance,
    extract_features,
    generate_instance,
    greedy_packing_value,
    sample_mixed_instances,
)
from .simplex import LpResult, LpStatus, lp_solve, solve_box_lp
from .trace import dual_trace

__all__ = [
    "BnbResult",
    "BnbStatus",
    "DESK_SIZES",
    "FEATURE_DIM",
    "Family",
    "GeneratorSpec",
    "IpInstance",
    "LpCache",
    "LpResult",
    "LpStatus",
    "bnb_run",
    "branch_scores",
    "dual_trace",
    "extract_features",
    "generate_instance",
    "greedy_packing_value",
    "lp_solve",
    "sample_mixed_instances",
    "solve_box_lp",
]
