"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operator/state shape is inconsistent with the declared bipartition."""


class DomainError(ValueError):
    """Input violates a mathematical precondition (non-unitary, zero operator, ...)."""


class ValidationError(ValueError):
    """A constructed object fails its own invariants (NRC violation, bad spectrum, ...)."""


class NumericalHealthError(RuntimeError):
    """Two routes to the same quantity disagree beyond tolerance, or a residual is too large."""


class ResourceLimitError(RuntimeError):
    """Requested problem size exceeds the configured memory/size cap."""


class ConfigError(ValueError):
    """Experiment configuration is malformed."""
