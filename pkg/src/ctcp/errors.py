"""Exception hierarchy shared by all ctcp modules.

The CLI maps these onto stable exit codes: validation errors exit 1,
I/O / file-format errors exit 2, numeric failures exit 3.
"""


class CtcpError(Exception):
    """Base class for all library errors."""


class ShapeError(CtcpError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ValidationError(CtcpError, ValueError):
    """A configuration value or call contract was violated."""


class NumericError(CtcpError, ArithmeticError):
    """A numerical operation failed (singular system, non-finite value, ...)."""


class DataFormatError(CtcpError, RuntimeError):
    """A serialized file is corrupt, truncated, or inconsistent."""
