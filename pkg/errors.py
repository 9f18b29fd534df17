#!/usr/bin/env python3
"""
Exception types shared by every gikit module.

The CLI maps them to exit statuses: invalid-argument family -> 1,
NumericError -> 2.
"""

from typing import Optional


class GikitError(Exception):
    """Base class for all gikit errors"""


class InvalidArgumentError(GikitError, ValueError):
    """Raised when an operation receives arguments violating its preconditions"""


class ParseError(InvalidArgumentError):
    """Malformed line in an input file"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(InvalidArgumentError):
    """Well-formed record that violates the embedding schema"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericError(GikitError, ArithmeticError):
    """
    Non-finite or underflowing intermediate result.

    Args:
        message: Description of the failure
        index: Offending dimension, coordinate, step or iteration, if known
    """

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message)


class CorpusGenerationError(InvalidArgumentError):
    """Synthetic corpus constraints could not be met within the attempt budget"""
