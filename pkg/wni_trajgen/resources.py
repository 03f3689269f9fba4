"""
Resource management utility for packaged JSON schemas.

Artifact files written by the pipeline are validated against the schemas in
``wni_trajgen/schemas`` both when they are produced and when they are read back.
"""

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

import jsonschema

from .errors import ArtifactFormatError

logger = logging.getLogger(__name__)


def get_resource_path(relative_path: str) -> Path:
    """
    Get the absolute path to a file shipped inside the package.

    Args:
        relative_path: Path relative to the wni_trajgen package

    Returns:
        Absolute path to the resource
    """
    return Path(__file__).parent / relative_path


@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    """
    Load a packaged JSON schema by name.

    Args:
        name: Schema name without extension (e.g. "bkb")

    Returns:
        Parsed schema
    """
    resource_path = get_resource_path(f"schemas/{name}.json")
    if not resource_path.exists():
        raise ArtifactFormatError(f"Schema resource not found: {resource_path}")
    with open(resource_path, "r", encoding="utf-8") as f:
        return json.load(f)


@lru_cache(maxsize=None)
def get_validator(name: str) -> jsonschema.Draft7Validator:
    """Compiled validator for a packaged schema; the schema itself is checked once."""
    schema = load_schema(name)
    try:
        jsonschema.Draft7Validator.check_schema(schema)
    except jsonschema.SchemaError as e:
        logger.error(f"Schema {name} is invalid: {e.message}")
        raise ArtifactFormatError(f"Schema error in {name}: {e.message}")
    return jsonschema.Draft7Validator(schema)


def validate_document(document: Any, schema_name: str, source: str = "") -> None:
    """
    Validate a document against a packaged schema.

    Args:
        document: Parsed JSON value
        schema_name: Name of the schema in ``schemas/``
        source: File or artifact name used in the error message

    Raises:
        ArtifactFormatError: If the document does not match the schema
    """
    validator = get_validator(schema_name)
    try:
        validator.validate(document)
    except jsonschema.ValidationError as e:
        error_path = " -> ".join(str(p) for p in e.absolute_path) if e.absolute_path else "root"
        raise ArtifactFormatError(
            f"{source or schema_name} failed validation at {error_path}: {e.message}",
            context={"schema": schema_name},
        )
