"""
Exception hierarchy for mpclo.

Every error names the check that failed so the CLI can print it and map it
to an exit code: 2 for parse/validation problems, 3 for solver problems,
4 for failed verifications.
"""
from typing import Any, Dict, Optional


class MpcloError(Exception):
    """Base class for all mpclo errors."""
    exit_code = 1

    def __init__(self, message: str, check: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.check = check or type(self).__name__
        self.details = details or {}

    def __str__(self):
        return f"{self.check}: {self.args[0]}"


# --- Parse / validation errors (exit 2) ---

class ValidationError(MpcloError):
    exit_code = 2


class ParseError(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class AsymmetricInput(ValidationError):
    pass


class OrthogonalityViolation(ValidationError):
    pass


class SingularGram(ValidationError):
    pass


class ParamDimensionMismatch(ValidationError):
    pass


class InfeasibleWitness(ValidationError):
    pass


class UnsupportedDimension(ValidationError):
    pass


class WindowOutsideTheta(ValidationError):
    pass


# --- Solver errors (exit 3) ---

class SolverError(MpcloError):
    exit_code = 3


class NotSolvable(SolverError):
    """Raised when a family cannot be solved to optimality; carries the solver status."""

    def __init__(self, message: str, status: str, check: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, check=check, details=details)
        self.status = status


class NumericalTrouble(SolverError):
    pass


class MaxIterReached(SolverError):
    pass


class OutsideTheta(SolverError):
    pass


class UndefinedMap(SolverError):
    pass


# --- Verification failures (exit 4) ---

class VerificationFailure(MpcloError):
    exit_code = 4
