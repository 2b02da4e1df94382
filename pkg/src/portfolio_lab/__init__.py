"""Portfolio-based algorithm selection lab.

End-to-end tooling around a parameterized branch-and-bound solver: exact
piecewise-constant dual performance functions, greedy/exhaustive portfolio
construction with optimality diagnostics, trainable algorithm selectors,
sample-complexity bound calculators with brute-force shattering verifiers,
and an experiment harness for the portfolio-size overfitting tradeoff.
"""

__version__ = "0.1.0"

from .piecewise import (
    CandidateSet,
    Orientation,
    PerformanceTable,
    PiecewiseConstantFn,
    build_table,
    canonicalize,
    extract_candidates,
)

__all__ = [
    "CandidateSet",
    "Orientation",
    "PerformanceTable",
    "PiecewiseConstantFn",
    "build_table",
    "canonicalize",
    "extract_candidates",
    "__version__",
]
