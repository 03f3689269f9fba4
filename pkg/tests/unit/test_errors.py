"""
Tests for the error hierarchy and the exception classifier.
"""

import json

import jsonschema
import pytest
from pydantic import BaseModel

from wni_trajgen.errors import (
    ArtifactFormatError,
    ConfigurationError,
    DivergenceError,
    FeasibilityError,
    NumericalError,
    StagingError,
    TrajGenError,
    VocabularyError,
    classify_error,
)


class _Strict(BaseModel):
    value: int


def test_message_includes_stage_and_context():
    """Stage and context are appended to the message."""
    error = ConfigurationError("Bad width", stage="train-gdm", context={"expected": 4})
    assert str(error) == "Bad width (Stage: train-gdm) (expected=4)"
    assert error.to_dict() == {
        "error_type": "ConfigurationError",
        "message": "Bad width",
        "stage": "train-gdm",
        "context": {"expected": "4"},
        "exit_code": 2,
    }


@pytest.mark.parametrize(
    "error,code",
    [
        (ConfigurationError("x"), 2),
        (VocabularyError("x"), 2),
        (ArtifactFormatError("x"), 2),
        (StagingError("x"), 3),
        (DivergenceError("x"), 4),
        (TrajGenError("x"), 1),
    ],
)
def test_exit_codes(error, code):
    """Each error family maps to its process exit code."""
    assert error.exit_code == code


def test_feasibility_error_names_constraint():
    """The violated constraint is kept as an attribute and in the context."""
    error = FeasibilityError("over budget", constraint="total power")
    assert error.constraint == "total power"
    assert error.context["constraint"] == "total power"


def test_classify_passes_through_and_sets_stage():
    """Pipeline errors keep their type and gain the running stage."""
    original = StagingError("missing")
    classified = classify_error(original, stage="generate")
    assert classified is original
    assert classified.stage == "generate"


def test_classify_foreign_exceptions():
    """Library exceptions map onto the pipeline hierarchy."""
    with pytest.raises(Exception) as pydantic_error:
        _Strict(value="not a number")
    assert isinstance(classify_error(pydantic_error.value), ConfigurationError)

    with pytest.raises(jsonschema.ValidationError) as schema_error:
        jsonschema.validate(1, {"type": "string"})
    assert isinstance(classify_error(schema_error.value), ArtifactFormatError)

    with pytest.raises(json.JSONDecodeError) as decode_error:
        json.loads("{")
    assert isinstance(classify_error(decode_error.value), ArtifactFormatError)

    not_found = FileNotFoundError(2, "No such file", "gdm/manifest.json")
    missing = classify_error(not_found, stage="generate")
    assert isinstance(missing, StagingError)
    assert "gdm/manifest.json" in missing.message

    assert isinstance(classify_error(FloatingPointError("overflow")), NumericalError)
    assert type(classify_error(RuntimeError("boom"))) is TrajGenError
