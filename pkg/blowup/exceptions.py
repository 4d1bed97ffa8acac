"""
Errors raised by the solver.

Configuration problems use Django's ValidationError (see config.py);
everything numerical derives from SchemeError.
"""


class SchemeError(Exception):
    """Base class for numerical failures."""


class GridError(SchemeError, ValueError):
    """Invalid domain description (N < 1, nonpositive extent, bad dimension)."""


class FieldShapeError(SchemeError, ValueError):
    """A nodal array does not match the operator's grid."""


class NegativeFieldError(SchemeError, ValueError):
    """A field that must be nonnegative (or positive) has an offending node."""


class EigenSolverError(SchemeError):
    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


class LinearSolveError(SchemeError):
    """Iterative linear solve did not reach its tolerance."""


class StepConditionError(SchemeError):
    """The solvability condition for the implicit step fails at this dt."""


class SupersolutionConsistencyError(SchemeError):
    """f(a) >= 0 or f(b) <= 0 while building the constant supersolution.

    The bracket signs are guaranteed analytically, so this means a coding error.
    """


class NonConvergenceError(SchemeError):
    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class MonotonicityViolation(SchemeError):
    """A Keller iterate increased or lost positivity."""


class DiagnosticsError(SchemeError, ValueError):
    """A functional was evaluated outside its domain (zero norm, bad time)."""


class OracleDivergence(SchemeError):
    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class StepFailure(SchemeError):
    """Wraps the error of one time step with where it happened."""

    def __init__(self, step, t, cause):
        super().__init__(f"step {step} at t={t!r} failed: {cause}")
        self.step = step
        self.t = t
        self.cause = cause


class StepBudgetExceeded(SchemeError):
    """The run hit MAX_STEPS without reaching a terminal outcome."""


class RefinementFailure(SchemeError):
    """A self-convergence level did not reach the common final time."""
