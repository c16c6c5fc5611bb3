"""Exception types shared across the package.

The CLI maps these onto exit codes: argument/config errors -> 2,
I/O, format and data errors -> 3, numeric failures -> 4.
"""


class ArgumentError(ValueError):
    """An argument or configuration value is outside its legal domain."""


class DataError(ValueError):
    """Data content violates an invariant (non-finite values, empty views, ...)."""


class FormatError(ValueError):
    """A file's layout disagrees with its manifest or expected structure."""


class NumericError(ArithmeticError):
    """A numeric computation produced a non-finite or undefined result."""
