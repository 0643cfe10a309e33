# app/core/errors.py
from __future__ import annotations
from typing import Any, Optional


class ExclusionBoundsError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(ExclusionBoundsError, ValueError):
    pass


class NegativeEigenvalue(ExclusionBoundsError, ValueError):
    """A PSD operator was required but the input has a clearly negative eigenvalue."""

    def __init__(self, min_eigenvalue: float, tol: float):
        super().__init__(f"Operator is not PSD: min eigenvalue {min_eigenvalue:.3e} < -{tol:.3e}")
        self.min_eigenvalue = min_eigenvalue
        self.tol = tol


class InvalidAlpha(ExclusionBoundsError, ValueError):
    pass


class ZeroOperator(ExclusionBoundsError, ValueError):
    pass


class InvalidEffect(ExclusionBoundsError, ValueError):
    pass


class InvalidOperator(ExclusionBoundsError, ValueError):
    """A domain type invariant (state, POVM, channel, ensemble, weights) does not hold."""


class DimensionCap(ExclusionBoundsError, ValueError):
    pass


class SolverStalled(ExclusionBoundsError, RuntimeError):
    """The solver missed its tolerance; `result` still holds the best certificate found."""

    def __init__(self, message: str, result: Any = None):
        super().__init__(message)
        self.result = result


class ProblemParseError(ExclusionBoundsError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class ProblemValidationError(ExclusionBoundsError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
