"""
Exception hierarchy for dhym-lab.

Library code raises these; the command line layer maps each class to an exit code.
"""

from typing import Any, Dict, Optional


class DhymLabError(Exception):
    """Base class for every error raised by the lab."""

    exit_code = 1


class InputError(DhymLabError, ValueError):
    """Malformed input or a violated precondition."""

    exit_code = 2


class NotPositiveDefiniteError(InputError):
    """A background metric failed the positive-definiteness check."""

    def __init__(self, smallest_eigenvalue: float, what: str = "alpha"):
        self.smallest_eigenvalue = smallest_eigenvalue
        super().__init__(f"{what} is not positive definite: smallest eigenvalue {smallest_eigenvalue:.6e}")


class SubcriticalError(DhymLabError):
    """Data is not supercritical, or a candidate is not a subsolution."""

    exit_code = 3


class SolverFailure(DhymLabError):
    """A nonlinear solve or a continuation path gave up."""

    exit_code = 4

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        self.report = report or {}
        super().__init__(message)


class PathAssertionError(DhymLabError):
    """A bound that must hold along the continuity path was violated."""

    exit_code = 5
