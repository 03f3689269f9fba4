"""
JSON checkpoints for named parameter sets.

Floats are written with ``repr`` precision (17 significant digits), which
round-trips 64-bit values exactly.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from ..errors import ArtifactFormatError
from ..resources import validate_document
from .layers import Module, Parameter

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def checkpoint_document(
    params: Union[Module, Mapping[str, Union[Parameter, np.ndarray]]],
    seed: int,
    config_hash: str,
    step_count: int,
    **extra: Any,
) -> Dict[str, Any]:
    """Build the checkpoint document for a module or a name -> array mapping."""
    named = params.named_parameters() if isinstance(params, Module) else params
    parameters: Dict[str, Dict[str, Any]] = {}
    for name, value in named.items():
        array = value.value if isinstance(value, Parameter) else np.asarray(value, dtype=np.float64)
        rows, cols = (1, array.size) if array.ndim == 1 else (array.shape[0], int(np.prod(array.shape[1:])))
        parameters[name] = {"rows": int(rows), "cols": int(cols), "data": [float(x) for x in array.reshape(-1)]}
    metadata = {"seed": int(seed), "config_hash": config_hash, "step_count": int(step_count)}
    metadata.update(extra)
    return {"format_version": FORMAT_VERSION, "metadata": metadata, "parameters": parameters}


def save_checkpoint(
    path: Path,
    params: Union[Module, Mapping[str, Union[Parameter, np.ndarray]]],
    seed: int,
    config_hash: str,
    step_count: int,
    **extra: Any,
) -> Path:
    """Write a checkpoint; returns the path."""
    document = checkpoint_document(params, seed, config_hash, step_count, **extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, separators=(",", ":"))
    logger.info(f"Saved checkpoint with {len(document['parameters'])} tensors to {path}")
    return path


def parse_checkpoint(document: Any, source: str = "checkpoint") -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Validate a parsed document and return (name -> array, metadata)."""
    validate_document(document, "checkpoint", source=source)
    state: Dict[str, np.ndarray] = {}
    for name, entry in document["parameters"].items():
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != entry["rows"] * entry["cols"]:
            raise ArtifactFormatError(
                f"{source}: tensor '{name}' declares {entry['rows']}x{entry['cols']} "
                f"but holds {data.size} values"
            )
        state[name] = data.reshape(entry["rows"], entry["cols"])
    return state, document["metadata"]


def load_checkpoint(path: Path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read a checkpoint written by ``save_checkpoint``."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ArtifactFormatError(f"Checkpoint {path} is not valid JSON (truncated?): {e}")
    return parse_checkpoint(document, source=str(path))


def load_into(module: Module, path: Path) -> Dict[str, Any]:
    """Load a checkpoint into ``module`` and return its metadata."""
    state, metadata = load_checkpoint(path)
    module.load_state_dict(state)
    return metadata
