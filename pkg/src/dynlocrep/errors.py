"""Exception types shared across the package.

The CLI maps these onto process exit codes; library callers can catch
the common base class.
"""


class DynLocRepError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DynLocRepError, ValueError):
    """A configuration value is invalid or inconsistent."""


class InputError(DynLocRepError, ValueError):
    """Runtime data violates a precondition (shape, finiteness, size)."""


class ParseError(DynLocRepError, ValueError):
    """A file could not be parsed; the message names the offending line."""


class NumericalError(DynLocRepError, ArithmeticError):
    """A numerical computation produced a non-finite result."""
