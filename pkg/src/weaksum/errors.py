"""Exception types raised across the toolkit.

Every error carries a short machine-readable ``reason`` code so the CLI can
report it verbatim (e.g. ``REJECT_EMPTY_SECURITY``).
"""

from __future__ import annotations


class WeakSumError(Exception):
    reason = "ERROR"

    def __init__(self, message: str, reason: str | None = None):
        super().__init__(message)
        if reason is not None:
            self.reason = reason

    def __str__(self) -> str:
        return f"{self.reason}: {self.args[0]}"


class PatternError(WeakSumError, ValueError):
    """Invalid security/colluding pattern (``REJECT_*`` reasons)."""


class WrongCaseError(WeakSumError):
    reason = "WRONG_CASE"


class MissingLpError(WeakSumError):
    reason = "MISSING_LP"


class RetryExhausted(WeakSumError):
    reason = "RETRY_EXHAUSTED"


class DimensionMismatch(WeakSumError, ValueError):
    reason = "DIM_MISMATCH"


class SizeLimitError(WeakSumError):
    reason = "SIZE_LIMIT"


class InternalFault(WeakSumError):
    reason = "INTERNAL_FAULT"


class CorrectnessError(InternalFault):
    """Decoded sum differs from the true sum, or a message has the wrong length."""
    reason = "CORRECTNESS_VIOLATION"
