"""Exception hierarchy shared by every alpha_discovery module.

Degenerate numerical situations (constant cross-sections, zero variance
windows) are not errors and are reported through flags instead; the
classes below are only raised when an operation cannot produce a
meaningful result.

Authors
-------
    alpha_discovery contributors

Use
---
    This module is intended to be imported:

    >>> from alpha_discovery.Alpha_Discovery_Errors import DataError
"""


class AlphaDiscoveryError(Exception):
    """Base class for every error raised by the package."""


class PanelFormatError(AlphaDiscoveryError):
    """A panel or feature CSV could not be parsed.

    Attributes
    ----------
    line_number: int
        1-based line of the offending row (the header is line 1), or
        None when the problem is not tied to one row.
    """

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = 'line {}: {}'.format(line_number, message)
        AlphaDiscoveryError.__init__(self, message)
        self.line_number = line_number


class DataError(AlphaDiscoveryError):
    """Data is too short, misaligned, or otherwise unusable."""


class ExpressionError(AlphaDiscoveryError):
    """An alpha expression is malformed or cannot be evaluated."""


class TrainingError(AlphaDiscoveryError):
    """Network training hit a non-finite loss or a shape mismatch."""


class ConfigError(AlphaDiscoveryError):
    """A configuration value is unknown, malformed or out of range.

    Attributes
    ----------
    field: string
        The offending ``section.key`` (or bare field name).
    """

    def __init__(self, field, message):
        AlphaDiscoveryError.__init__(self, '{}: {}'.format(field, message))
        self.field = field
