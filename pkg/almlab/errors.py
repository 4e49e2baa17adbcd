"""
Typed errors raised by the solver and diagnostics.

Every error carries a message, a details dict and the process exit code
the CLI maps it to: 1 for bad input, 2 for numerical failure.
"""
from typing import Any, Dict, Optional


class AlmLabError(Exception):
    """Base error with message and details"""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class InvalidProblemError(AlmLabError):
    """A problem or configuration invariant does not hold"""


class DimensionMismatchError(AlmLabError):
    """Vector or operator dimensions disagree"""


class NotPositiveDefiniteError(AlmLabError):
    """Cholesky factorization failed"""


class InfeasiblePointError(AlmLabError):
    """A point required to be feasible is not"""


class AssumptionViolatedError(AlmLabError):
    """A construction's hypothesis fails, e.g. a zero essential multiplier"""


class ConsistencyError(AlmLabError):
    """Two computations that must agree do not"""


class NumericalError(AlmLabError):
    exit_code = 2


class SpectralConvergenceError(NumericalError):
    """Eigenvalue iteration hit its cap; details hold the best estimate"""


class ProjectionConvergenceError(NumericalError):
    """Dykstra's algorithm hit its sweep cap; details hold the last iterate"""


class InnerSolverError(NumericalError):
    """Inner minimization failed to reach its tolerance"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None, trace=None):
        super().__init__(message, details)
        self.trace = trace


class FeasibilitySuspectError(NumericalError):
    """Residual stalls above tolerance while steps shrink"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None, trace=None):
        super().__init__(message, details)
        self.trace = trace
