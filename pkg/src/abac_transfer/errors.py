"""Exception types shared across the package."""


class AbacTransferError(Exception):
    """Base class for all errors raised by this package."""


class UnknownEntityError(AbacTransferError):
    """A user, resource, or operation id is not declared in the domain context."""


class MissingRangeError(AbacTransferError):
    """An attribute has no declared finite value range but one is required."""


class AdaptationError(AbacTransferError):
    """An adaptation operation was invoked on inputs that violate its precondition."""


class ConvergenceError(AbacTransferError):
    """Conflict resolution failed to reach a fixed point within the pass limit."""


class PipelineError(AbacTransferError):
    """A learner pipeline is misconfigured or a stage received invalid input."""


class LogFormatError(AbacTransferError):
    """A decision log file or its schema map is malformed; message names the row."""


class ScenarioError(AbacTransferError):
    """A scenario configuration cannot be realized (e.g. too many distinct rules)."""
