"""
Error types raised by the attribution engine.

Library code raises these; the command-line front end maps them to exit
codes (2 for configuration/input problems, 3 for numeric failures).
"""


class SplitIGError(Exception):
    """Base class for every error raised by the package."""


class InputShapeError(SplitIGError):
    """Input does not match the shape a graph, path or metric expects."""


class NumericOverflowError(SplitIGError, ArithmeticError):
    """A value became NaN or infinite during evaluation."""


class InvalidSpecError(SplitIGError):
    """Model specification is inconsistent (shapes, kind, target index)."""


class PreconditionError(SplitIGError, ValueError):
    """An argument violates an operation's precondition."""


class TrainingDivergedError(SplitIGError, ArithmeticError):
    """Training loss became non-finite."""


class ModelFileParseError(SplitIGError):
    """Weight file is malformed or truncated."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        context = []
        if line is not None:
            context.append(f"line {line}")
        if field is not None:
            context.append(f"field '{field}'")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class ModelFileVersionError(SplitIGError):
    """Weight file uses an unknown format version or model kind."""


class UndefinedRatioError(SplitIGError, ZeroDivisionError):
    """Norm ratio with a zero-norm denominator."""


class UndefinedSimilarityError(SplitIGError, ZeroDivisionError):
    """Cosine similarity with a zero-norm argument."""


class UndefinedSensitivityError(SplitIGError, ZeroDivisionError):
    """Sensitivity of an attribution whose norm at the input is zero."""


class ConfigError(SplitIGError):
    """Run configuration is invalid or references something missing."""
