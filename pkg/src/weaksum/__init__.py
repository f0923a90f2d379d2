"""Secure summation with weak security: optimal key rates and linear schemes."""

from __future__ import annotations

from .errors import (CorrectnessError, DimensionMismatch, MissingLpError, PatternError,
                     RetryExhausted, SizeLimitError, WeakSumError, WrongCaseError)
from .pattern import Case, Pattern, RateAnalysis, analyze, load_pattern, normalize_pattern
from .ratecalc import LpSolution, optimal_rate, solve_lp_exact
from .scheme import KeyScheme, synthesize
from .protocol import Transcript, coalition_view, run_round, simulate
from .audit import AuditReport, converse_audit, security_mi

__version__ = "0.1.0"

__all__ = [
    "AuditReport", "Case", "CorrectnessError", "DimensionMismatch", "KeyScheme",
    "LpSolution", "MissingLpError", "Pattern", "PatternError", "RateAnalysis",
    "RetryExhausted", "SizeLimitError", "Transcript", "WeakSumError", "WrongCaseError",
    "analyze", "coalition_view", "converse_audit", "load_pattern", "normalize_pattern",
    "optimal_rate", "run_round", "security_mi", "simulate", "solve_lp_exact", "synthesize",
]
