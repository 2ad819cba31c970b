"""Exception hierarchy shared by every subsystem.

The CLI maps these onto exit codes: validation/config -> 1,
I/O and file-format problems -> 2, numeric failures -> 3.
"""


class MricadeError(Exception):
    """Base class for all package errors."""


class ShapeError(MricadeError):
    """Array dimensions disagree with what an operation requires."""


class SpecError(MricadeError):
    """A layer or network description is internally inconsistent."""


class ConfigError(MricadeError):
    """Invalid configuration, missing statistics, or checkpoint/spec mismatch."""


class FormatError(MricadeError):
    """A binary file is corrupt, truncated, or carries the wrong magic/version."""


class ParseError(MricadeError):
    """A text input (CSV, config file) failed to parse; message names the line."""


class ValidationError(MricadeError):
    """Parsed data violates a semantic constraint (e.g. box outside the image)."""


class SeedingError(MricadeError):
    """Automaton seeding failed (e.g. foreground circle outside the image)."""


class StateError(MricadeError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class NumericError(MricadeError):
    """Non-finite values surfaced where finite numbers are required."""
