"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: parameter/config problems -> 2,
file format problems -> 3, OS-level I/O failures -> 4.
"""


class LsddError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(LsddError, ValueError):
    """An argument is outside its documented domain."""


class ConfigError(ParameterError):
    """A configuration file or key is invalid."""


class BandError(ParameterError):
    """A frequency-band selection is empty or out of range."""


class DegenerateInputError(ParameterError):
    """An input vector has zero norm where a direction is required."""


class InputTooShortError(ParameterError):
    """A signal is shorter than one analysis frame."""


class FormatError(LsddError):
    """A file does not conform to its documented container layout."""
