"""Exception hierarchy shared by every module of the package."""


class PersuasionError(Exception):
    """Base class for all errors raised by noisy_persuasion."""


class ParseError(PersuasionError):
    """Scenario file is missing or is not valid JSON of the expected shape."""


class ValidationError(PersuasionError):
    """Input data violates a type invariant (probabilities, dimensions, ...)."""


class DimensionError(ValidationError):
    """Array shapes are inconsistent with each other or with the state space."""


class SingularConfusion(ValidationError):
    """Confusion matrix is numerically singular and cannot be inverted."""


class IllConditioned(ValidationError):
    """Confusion matrix condition estimate exceeds the strict-mode threshold."""


class IllConditionedWarning(UserWarning):
    """Non-strict counterpart of :class:`IllConditioned`."""


class AssumptionWarning(UserWarning):
    """A modelling assumption that the solver does not need is violated."""


class SpaceTagError(PersuasionError):
    """A belief was passed in the wrong space (true vs predicted states)."""


class ZeroProbabilitySignal(PersuasionError):
    """A posterior was requested for a signal that is (almost) never sent."""


class NumericalInstability(PersuasionError):
    """The LP solver claims optimality but constraint residuals are too large."""


class WelfareViolation(PersuasionError):
    """User ex-ante utility decreased under signaling; indicates a bug."""


class GridTooLarge(PersuasionError):
    """A brute-force enumeration would exceed the configured point budget."""


class PreconditionError(PersuasionError):
    """An operation was called outside of its documented preconditions."""
