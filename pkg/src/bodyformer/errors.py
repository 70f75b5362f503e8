"""Exception types shared across the package."""


class BodyFormerError(Exception):
    pass


class DimensionError(BodyFormerError, ValueError):
    """Array extents do not agree."""


class ConfigError(BodyFormerError, ValueError):
    """Invalid configuration value."""


class InputError(BodyFormerError, ValueError):
    """Caller-supplied data violates an operation's precondition."""


class NumericError(BodyFormerError, ArithmeticError):
    """Degenerate or non-finite numerical input."""


class UsageError(BodyFormerError, RuntimeError):
    pass


class ParseError(BodyFormerError, ValueError):
    """Malformed file; message carries the record or line context."""
