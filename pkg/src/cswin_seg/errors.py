"""Exception types shared across the package.

Every failure mode maps to one of these so callers (and the CLI) can
distinguish bad shapes from bad configs from bad files.
"""


class DimensionError(ValueError):
    """Shapes, axes or dtypes of tensor arguments do not line up."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent (e.g. non-divisible stripe width)."""


class ContractError(RuntimeError):
    """An API precondition was violated (non-scalar loss, reused tape, ...)."""


class NumericError(ArithmeticError):
    """A non-finite value was produced; the message names the offending op."""


class DataError(ValueError):
    """Dataset contents violate their invariants (labels out of range, ...)."""


class FormatError(ValueError):
    """A serialized file is corrupt, truncated or of the wrong version."""
