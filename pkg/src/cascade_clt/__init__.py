"""Threshold cascades on configuration-model graphs: engines, limit theory, Monte Carlo checks."""

from .cascade import (
    CascadeResult,
    State,
    Trajectory,
    evaluate_at,
    evaluate_many,
    run_continuous,
    run_discrete,
)
from .cgm import Multigraph, build_multigraph, to_simple
from .dist import (
    EXAMPLE,
    DegreeThresholdDistribution,
    EmpiricalCounts,
    NodeSequence,
    empirical_counts,
    mean_degree,
    preset_bootstrap,
    preset_kcore,
    realize_rounded,
    realize_sampled,
    validate,
)
from .mc import SummaryStats, TrialRecord, run_trials, summarize
from .quadrature import QuadratureConfig
from .rules import RULES
from .theory import TheoryResult, a_hat, find_zhat, h_B, phi, sigma2_A, solve

__version__ = "0.1.0"

__all__ = [
    "CascadeResult", "State", "Trajectory", "evaluate_at", "evaluate_many",
    "run_continuous", "run_discrete", "Multigraph", "build_multigraph", "to_simple",
    "EXAMPLE", "DegreeThresholdDistribution", "EmpiricalCounts", "NodeSequence",
    "empirical_counts", "mean_degree", "preset_bootstrap", "preset_kcore",
    "realize_rounded", "realize_sampled", "validate", "SummaryStats", "TrialRecord",
    "run_trials", "summarize", "QuadratureConfig", "RULES", "TheoryResult", "a_hat",
    "find_zhat", "h_B", "phi", "sigma2_A", "solve",
]
