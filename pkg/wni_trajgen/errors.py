"""
Error handling utilities.
"""

import json
from typing import Any, Dict, Optional

import jsonschema
import pydantic


class TrajGenError(Exception):
    """Base error class for the trajectory-generation pipeline."""

    exit_code: int = 1

    def __init__(
        self,
        message: str,
        stage: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.stage = stage
        self.context = context or {}

        error_msg = message
        if stage:
            error_msg += f" (Stage: {stage})"
        if self.context:
            details = ", ".join(f"{k}={v}" for k, v in self.context.items())
            error_msg += f" ({details})"

        super().__init__(error_msg)

    def to_dict(self) -> Dict[str, Any]:
        """Structured form used by the CLI error report."""
        return {
            "error_type": type(self).__name__,
            "message": self.message,
            "stage": self.stage,
            "context": {k: str(v) for k, v in self.context.items()},
            "exit_code": self.exit_code,
        }


class ConfigurationError(TrajGenError):
    """Invalid configuration, shape mismatch or inconsistent hyper-parameters."""

    exit_code = 2


class ValidationError(TrajGenError):
    """Input failed semantic validation (e.g. mixed WNI entities)."""

    exit_code = 2


class VocabularyError(ValidationError):
    """Token outside the declared attribute vocabulary."""

    pass


class ArtifactFormatError(TrajGenError):
    """Artifact file is corrupt, truncated or has an unsupported format version."""

    exit_code = 2


class StagingError(TrajGenError):
    """A pipeline stage was requested without its upstream artifacts."""

    exit_code = 3


class ProvenanceError(TrajGenError):
    """Recorded upstream hash does not match the artifact on disk."""

    exit_code = 3


class DomainError(TrajGenError):
    """Argument outside the mathematical domain of an operation."""

    pass


class FeasibilityError(TrajGenError):
    """Power allocation violates a constraint of the allocation problem."""

    def __init__(self, message: str, constraint: str, context: Optional[Dict[str, Any]] = None):
        self.constraint = constraint
        context = dict(context or {})
        context["constraint"] = constraint
        super().__init__(message, context=context)


class BkbLookupError(TrajGenError):
    """Requested element type or intent is missing from the knowledge base."""

    pass


class DegenerateDataError(TrajGenError):
    """Dataset statistics are degenerate (zero variance, missing intents)."""

    pass


class NumericalError(TrajGenError):
    """Non-finite value produced inside a network."""

    exit_code = 4


class DivergenceError(NumericalError):
    """Training produced a non-finite loss."""

    pass


def classify_error(exc: BaseException, stage: Optional[str] = None) -> TrajGenError:
    """
    Classify an exception and return the appropriate pipeline error type.

    Args:
        exc: Exception raised anywhere in the pipeline
        stage: Stage that was running when it was raised

    Returns:
        Classified error instance
    """
    if isinstance(exc, TrajGenError):
        if stage and not exc.stage:
            exc.stage = stage
        return exc

    if isinstance(exc, pydantic.ValidationError):
        return ConfigurationError(f"Invalid configuration: {exc}", stage=stage)
    elif isinstance(exc, jsonschema.ValidationError):
        return ArtifactFormatError(f"Schema validation failed: {exc.message}", stage=stage)
    elif isinstance(exc, json.JSONDecodeError):
        return ArtifactFormatError(f"Malformed JSON: {exc}", stage=stage)
    elif isinstance(exc, FileNotFoundError):
        return StagingError(f"Missing file: {exc.filename}", stage=stage)
    elif isinstance(exc, (FloatingPointError, OverflowError)):
        return NumericalError(f"Numerical failure: {exc}", stage=stage)
    else:
        return TrajGenError(f"Unexpected error: {exc}", stage=stage)
