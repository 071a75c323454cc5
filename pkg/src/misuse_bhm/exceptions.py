"""
ABOUTME: Custom exception classes for the misuse BHM engine with specific error types and messages
ABOUTME: Provides structured error handling for data ingestion, model configuration, and sampling failures
"""

from typing import Optional


class MisuseBHMError(Exception):
    """Base exception for all misuse BHM errors."""
    pass


class DataParseError(MisuseBHMError):
    """Malformed row in an input table."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class IntegrityError(MisuseBHMError):
    """Cross-table reference or uniqueness violation."""
    pass


class DomainError(MisuseBHMError):
    """Argument outside the mathematical domain of an operation."""
    pass


class DegenerateCovariateError(MisuseBHMError):
    """Covariate column has zero variance and cannot be standardized."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Covariate '{column}' is constant across counties (sd = 0)")


class UnusableCovariateError(MisuseBHMError):
    """Covariate is missing in every county."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Covariate '{column}' is missing in all counties")


class NumericError(MisuseBHMError):
    """Non-finite value where a finite one is required."""
    pass


class ModelConfigurationError(MisuseBHMError):
    """Model configuration inconsistent with the dataset."""
    pass


class InitializationError(MisuseBHMError):
    """Sampler could not find a finite starting point."""
    pass


class AdaptationError(MisuseBHMError):
    """Warmup adaptation received unusable statistics."""
    pass


class RunError(MisuseBHMError):
    """A multi-chain run failed operationally."""
    pass


class StaleDrawsError(MisuseBHMError):
    """Stored draws were produced from a different dataset or configuration."""
    pass


class ConfigurationError(MisuseBHMError):
    """Configuration file error or invalid settings."""
    pass


class ValidationError(MisuseBHMError):
    """Precondition of a validation routine not met."""
    pass
