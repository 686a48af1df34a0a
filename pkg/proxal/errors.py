"""
Error module for proxal.

Exception hierarchy shared by the solver, the certifier and the harness.
"""


class ProxalError(Exception):
    """Base class for every error raised by proxal."""


class EvaluationError(ProxalError):
    """A problem evaluator returned NaN or Inf."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class ConfigError(ProxalError, ValueError):
    """Invalid or unreadable configuration."""


class PreconditionError(ProxalError, ValueError):
    """An operation was called outside its precondition."""


class ProblemDefinitionError(ProxalError, ValueError):
    """A problem instance violates a structural assumption (e.g. rank-deficient A)."""


class RankDeficiencyError(ProxalError):
    """The constraint Jacobian lost full column rank at the point."""

    def __init__(self, message, sigma_min):
        super().__init__(message)
        self.sigma_min = sigma_min


class MissingConstantError(ProxalError):
    """A ConstantsLedger field needed by a formula is unknown."""

    def __init__(self, field):
        super().__init__(f"constant '{field}' is unknown in the ledger")
        self.field = field


class UnsupportedSizeError(ProxalError):
    """Dense assembly requested above the dense threshold."""


class BudgetExhaustedError(ProxalError):
    """An iteration or Hessian-vector-product budget ran out mid-solve."""

    def __init__(self, message, partial=None, hvp_count=0):
        super().__init__(message)
        self.partial = partial
        self.hvp_count = hvp_count
