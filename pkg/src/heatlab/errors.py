"""Exception hierarchy shared by all heatlab modules."""


class HeatLabError(Exception):
    """Base class for every error raised by heatlab."""


class InvalidProblem(HeatLabError, ValueError):
    """A problem definition violates one of its construction invariants."""


class OutOfChart(HeatLabError):
    """A point (or a finite-difference stencil around it) leaves the chart domain."""


class SingularMetric(HeatLabError):
    """The inverse metric is too badly conditioned to invert."""


class LeftChart(HeatLabError):
    """A geodesic left the chart domain during integration."""


class NoConvergence(HeatLabError):
    """The shooting iteration for a geodesic boundary-value problem failed."""


class NegativeDeterminant(HeatLabError):
    """The Van Vleck-Morette determinant came out non-positive."""


class CostBudgetExceeded(HeatLabError):
    """A transport computation would exceed its evaluation budget."""


class OddDimension(HeatLabError, ValueError):
    """The K_-/K_+ split only exists in even dimension."""


class SupremumViolated(HeatLabError):
    """A sampled potential value exceeded the declared upper bound."""


class QuadratureError(HeatLabError):
    """An integral check failed to reach its requested accuracy."""


class ParseError(HeatLabError, ValueError):
    """Malformed field expression.

    Attributes
    ----------
    position : int
        Zero-based character offset in the source string.
    expected : str
        Human readable description of what the parser wanted to see.
    """

    def __init__(self, message, position=0, expected=""):
        super().__init__(f"{message} at position {position}" + (f" (expected {expected})" if expected else ""))
        self.position = position
        self.expected = expected


class ArityError(HeatLabError, ValueError):
    """A field expression has the wrong shape or refers to a missing coordinate."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} at position {position}")
        self.position = position


class TruncationWarning(UserWarning):
    """A truncated series still carries a large last term."""


class ConfigError(HeatLabError, ValueError):
    """A run configuration is incomplete or inconsistent."""
