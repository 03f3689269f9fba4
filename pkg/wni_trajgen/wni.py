"""
Wireless network intent (WNI) encoding.

A scenario is described by entity-attribute-value tuples sharing one entity.
Each tuple becomes one row ``[embed(attribute) || embed(value)]`` of the
conditioning matrix consumed by the diffusion model's cross-attention.
Embeddings come from a frozen, seeded table of unit-norm vectors.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from threading import Lock
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ArtifactFormatError, ValidationError, VocabularyError
from .models import EavTuple, IntentSpec
from .resources import validate_document
from .rng import make_rng

logger = logging.getLogger(__name__)

DEFAULT_EMBED_DIM = 16

ATTRIBUTE_VOCABULARY: Tuple[str, ...] = (
    "channel gain bucket",
    "interference",
    "los path loss",
    "los probability",
    "nlos path loss",
    "nlos probability",
    "noise",
    "transmission power",
    "transmission power set",
    "user scale",
)


class EmbeddingTable:
    """Deterministic token -> unit vector map; each vector depends only on (seed, token)."""

    def __init__(self, seed: int, dim: int = DEFAULT_EMBED_DIM):
        if dim < 1:
            raise ValidationError(f"Embedding dimension must be positive, got {dim}")
        self.seed = int(seed)
        self.dim = int(dim)
        self._cache: Dict[str, np.ndarray] = {}
        self._lock = Lock()

    def embed(self, token: str) -> np.ndarray:
        if not token:
            raise ValidationError("Cannot embed an empty token")
        with self._lock:
            vector = self._cache.get(token)
            if vector is None:
                raw = make_rng(self.seed, "wni-token", token).standard_normal(self.dim)
                vector = raw / np.linalg.norm(raw)
                vector.setflags(write=False)
                self._cache[token] = vector
        return vector


@dataclass(frozen=True)
class WniFeature:
    """Conditioning matrix: one row per attribute, sorted by attribute token."""

    matrix: np.ndarray
    entity: str
    attributes: Tuple[str, ...]
    seed: int

    @property
    def rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def width(self) -> int:
        return int(self.matrix.shape[1])

    def flatten(self) -> np.ndarray:
        return self.matrix.reshape(-1).copy()


def encode_intent(tuples: Sequence[EavTuple], table: EmbeddingTable) -> WniFeature:
    """
    Encode entity-attribute-value tuples into a WNI feature matrix.

    Args:
        tuples: Tuples describing a single entity
        table: Embedding table

    Returns:
        Feature with rows ordered lexicographically by attribute

    Raises:
        ValidationError: Empty input, mixed entities or repeated attributes
        VocabularyError: Attribute outside the declared vocabulary
    """
    tuples = list(tuples)
    if not tuples:
        raise ValidationError("An intent description needs at least one tuple")
    entities = sorted({t.entity for t in tuples})
    if len(entities) != 1:
        raise ValidationError("Intent tuples must share one entity", context={"entities": entities})
    unknown = sorted({t.attribute for t in tuples if t.attribute not in ATTRIBUTE_VOCABULARY})
    if unknown:
        raise VocabularyError(
            f"Unknown attribute tokens: {unknown}", context={"vocabulary": list(ATTRIBUTE_VOCABULARY)}
        )
    attributes = [t.attribute for t in tuples]
    if len(set(attributes)) != len(attributes):
        raise ValidationError("Attributes must not repeat within one intent", context={"attributes": attributes})

    ordered = sorted(tuples, key=lambda t: t.attribute)
    matrix = np.stack(
        [np.concatenate([table.embed(t.attribute), table.embed(t.value)]) for t in ordered]
    )
    return WniFeature(
        matrix=matrix,
        entity=entities[0],
        attributes=tuple(t.attribute for t in ordered),
        seed=table.seed,
    )


def power_token(total_power: float) -> str:
    return f"{total_power:g}W"


def experiment_intent_tuples(
    spec: IntentSpec,
    total_power: Optional[float],
    num_channels: int,
    noise_power: float,
    power_options: Optional[Iterable[float]] = None,
) -> List[EavTuple]:
    """
    Base-station description of one experiment intent.

    Intents differ only in the channel gain bucket. With ``total_power`` set the
    description names that budget; otherwise it names the whole option set.
    """
    tuples = [
        EavTuple(entity="BS", attribute="channel gain bucket", value=spec.bucket_token),
        EavTuple(entity="BS", attribute="user scale", value=str(num_channels)),
        EavTuple(entity="BS", attribute="noise", value=f"{noise_power:g}"),
    ]
    if total_power is not None:
        tuples.append(EavTuple(entity="BS", attribute="transmission power", value=power_token(total_power)))
    else:
        options = ",".join(power_token(p) for p in (power_options or []))
        if not options:
            raise ValidationError("Either total_power or power_options is required")
        tuples.append(EavTuple(entity="BS", attribute="transmission power set", value=options))
    return tuples


class WniEncoder:
    """Caches experiment features per (intent, power) over one embedding table."""

    def __init__(self, table: EmbeddingTable, intents: Sequence[IntentSpec], num_channels: int, noise_power: float):
        self.table = table
        self.intents = {spec.intent_id: spec for spec in intents}
        self.num_channels = num_channels
        self.noise_power = noise_power
        self._features: Dict[Tuple[int, float], WniFeature] = {}
        self._lock = Lock()

    def feature(self, intent_id: int, total_power: float) -> WniFeature:
        key = (int(intent_id), float(total_power))
        with self._lock:
            cached = self._features.get(key)
        if cached is not None:
            return cached
        if key[0] not in self.intents:
            raise VocabularyError(f"No intent description for intent {intent_id}")
        feature = encode_intent(
            experiment_intent_tuples(self.intents[key[0]], key[1], self.num_channels, self.noise_power),
            self.table,
        )
        with self._lock:
            self._features[key] = feature
        return feature

    def batch(self, intent_ids: np.ndarray, powers: np.ndarray) -> np.ndarray:
        """(B, rows, width) stack of features for per-row (intent, power) pairs."""
        return np.stack([self.feature(i, p).matrix for i, p in zip(intent_ids, powers)])


def parse_intent_description(document: object, source: str = "intent description") -> List[EavTuple]:
    validate_document(document, "intent_description", source)
    entity = document["entity"]
    return [EavTuple(entity=entity, attribute=a["name"], value=a["value"]) for a in document["attributes"]]


def load_intent_description(path: Path) -> List[EavTuple]:
    """Read ``{"entity": ..., "attributes": [{"name", "value"}]}`` from disk."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ArtifactFormatError(f"Intent description {path} is not valid JSON: {e}")
    tuples = parse_intent_description(document, str(path))
    logger.debug(f"Loaded {len(tuples)} intent tuples from {path}")
    return tuples


def intent_description_document(tuples: Sequence[EavTuple]) -> Dict[str, object]:
    entities = {t.entity for t in tuples}
    if len(entities) != 1:
        raise ValidationError("Intent tuples must share one entity", context={"entities": sorted(entities)})
    return {
        "entity": tuples[0].entity,
        "attributes": [{"name": t.attribute, "value": t.value} for t in tuples],
    }
