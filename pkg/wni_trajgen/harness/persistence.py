"""
Artifact persistence: JSON Lines datasets, the knowledge base, JSON manifests
and the hashes that chain stage outputs together.

Files are written deterministically (fixed key order, ``repr`` floats) so a
rerun with the same configuration and seed reproduces them byte for byte.
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from ..dataset import TrajectoryDataset
from ..errors import ArtifactFormatError, ProvenanceError, StagingError
from ..models import ELEMENT_TYPES, Bkb
from ..resources import validate_document

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def require_file(path: Path, stage: Optional[str] = None) -> Path:
    """Return ``path`` if it exists, else raise StagingError naming it."""
    path = Path(path)
    if not path.is_file():
        raise StagingError(f"Missing upstream artifact: {path}", stage=stage, context={"path": str(path)})
    return path


def verify_hash(path: Path, expected: str, stage: Optional[str] = None) -> None:
    actual = sha256_file(require_file(path, stage))
    if actual != expected:
        raise ProvenanceError(
            f"Artifact {path} does not match its recorded hash",
            stage=stage,
            context={"expected": expected[:12], "actual": actual[:12]},
        )


def write_json(path: Path, document: Any) -> str:
    """Write sorted, indented JSON and return its SHA-256."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(document, sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def read_json(path: Path, schema_name: Optional[str] = None, stage: Optional[str] = None) -> Any:
    path = require_file(path, stage)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ArtifactFormatError(f"{path} is not valid JSON (truncated?): {e}", stage=stage)
    if schema_name:
        validate_document(document, schema_name, str(path))
    return document


def _record(dataset: TrajectoryDataset, i: int) -> Dict[str, Any]:
    record: Dict[str, Any] = {"intent": int(dataset.intent[i])}
    for name in ELEMENT_TYPES:
        record[name] = [float(x) for x in dataset.element(name)[i]]
    power = float(dataset.power[i])
    if not math.isnan(power):
        record["power"] = power
    return record


def write_dataset(
    path: Path,
    dataset: TrajectoryDataset,
    kind: str,
    config_hash: str,
    seed: int,
    **extra_meta: Any,
) -> str:
    """
    Write a header line plus one trajectory per line.

    Returns:
        SHA-256 of the written file
    """
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "count": len(dataset),
        "config_hash": config_hash,
        "seed": int(seed),
    }
    if kind == "generated":
        meta["generated"] = True
    meta.update(extra_meta)
    header = {"meta": meta}
    validate_document(header, "dataset_header", str(path))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256()
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for document in [header] + [_record(dataset, i) for i in range(len(dataset))]:
            line = json.dumps(document, sort_keys=True, separators=(",", ":")) + "\n"
            digest.update(line.encode("utf-8"))
            f.write(line)
    logger.info(f"Wrote {len(dataset)} {kind} trajectories to {path}")
    return digest.hexdigest()


def read_dataset(path: Path, stage: Optional[str] = None) -> Tuple[TrajectoryDataset, Dict[str, Any]]:
    """Read a JSON Lines dataset; returns (dataset, header meta)."""
    path = require_file(path, stage)
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ArtifactFormatError(f"Dataset {path} is empty", stage=stage)

    documents = []
    for number, line in enumerate(lines, start=1):
        try:
            documents.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ArtifactFormatError(f"{path}:{number} is not valid JSON: {e}", stage=stage)
    header, records = documents[0], documents[1:]
    validate_document(header, "dataset_header", f"{path}:1")
    meta = header["meta"]
    if meta["count"] != len(records):
        raise ArtifactFormatError(
            f"Dataset {path} declares {meta['count']} trajectories but holds {len(records)}",
            stage=stage,
        )
    for number, record in enumerate(records, start=2):
        validate_document(record, "trajectory", f"{path}:{number}")

    if not records:
        return TrajectoryDataset.empty(0, meta=meta), meta
    widths = {len(record[name]) for record in records for name in ELEMENT_TYPES}
    if len(widths) != 1:
        raise ArtifactFormatError(f"Dataset {path} mixes channel counts {sorted(widths)}", stage=stage)
    dataset = TrajectoryDataset(
        intent=np.array([record["intent"] for record in records]),
        power=np.array(
            [math.nan if record.get("power") is None else record["power"] for record in records]
        ),
        meta=dict(meta),
        **{name: np.array([record[name] for record in records]) for name in ELEMENT_TYPES},
    )
    logger.debug(f"Read {len(dataset)} trajectories from {path}")
    return dataset, meta


def save_bkb(path: Path, bkb: Bkb) -> str:
    document = bkb.model_dump(mode="json")
    validate_document(document, "bkb", str(path))
    return write_json(path, document)


def load_bkb(path: Path, stage: Optional[str] = None) -> Bkb:
    document = read_json(path, "bkb", stage)
    try:
        return Bkb.model_validate(document)
    except PydanticValidationError as e:
        raise ArtifactFormatError(f"Knowledge base {path} is invalid: {e}", stage=stage)
