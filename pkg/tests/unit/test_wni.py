"""
Tests for intent encoding.
"""

import json

import numpy as np
import pytest

from wni_trajgen.config import EnvSection
from wni_trajgen.errors import ArtifactFormatError, ValidationError, VocabularyError
from wni_trajgen.models import EavTuple
from wni_trajgen.wni import (
    EmbeddingTable,
    WniEncoder,
    encode_intent,
    experiment_intent_tuples,
    intent_description_document,
    load_intent_description,
)


def test_single_tuple_shape():
    """One tuple encodes to one row of attribute and value embeddings."""
    table = EmbeddingTable(seed=7, dim=16)
    feature = encode_intent([EavTuple(entity="BS", attribute="noise", value="1")], table)

    assert feature.matrix.shape == (1, 32)
    assert feature.flatten().shape == (32,)
    assert feature.entity == "BS"
    np.testing.assert_allclose(np.linalg.norm(feature.matrix[0, :16]), 1.0)


def test_encoding_is_deterministic():
    """Same tuples and seed, same matrix, even from a fresh table."""
    tuples = experiment_intent_tuples(EnvSection().intent(2), 18.0, 16, 1.0)
    first = encode_intent(tuples, EmbeddingTable(seed=7))
    second = encode_intent(tuples, EmbeddingTable(seed=7))
    np.testing.assert_array_equal(first.matrix, second.matrix)


def test_rows_sorted_by_attribute():
    """Row order does not depend on tuple order."""
    tuples = experiment_intent_tuples(EnvSection().intent(3), 6.0, 16, 1.0)
    table = EmbeddingTable(seed=1)
    forward = encode_intent(tuples, table)
    backward = encode_intent(list(reversed(tuples)), table)

    assert list(forward.attributes) == sorted(forward.attributes)
    np.testing.assert_array_equal(forward.matrix, backward.matrix)


def test_experiment_intents_differ():
    """Intents 1 and 5 differ only in the gain bucket but encode far apart."""
    config = EnvSection()
    table = EmbeddingTable(seed=7)
    one = encode_intent(experiment_intent_tuples(config.intent(1), 18.0, 16, 1.0), table)
    five = encode_intent(experiment_intent_tuples(config.intent(5), 18.0, 16, 1.0), table)
    assert np.linalg.norm(one.flatten() - five.flatten()) > 0.1


def test_power_changes_encoding():
    """The transmission power token enters the feature."""
    encoder = WniEncoder(EmbeddingTable(seed=7), EnvSection().intents, 16, 1.0)
    low = encoder.feature(3, 6.0)
    high = encoder.feature(3, 30.0)
    assert not np.array_equal(low.matrix, high.matrix)
    assert encoder.feature(3, 6.0) is low


def test_power_set_description():
    """Without a budget the description lists the option set."""
    tuples = experiment_intent_tuples(EnvSection().intent(1), None, 16, 1.0, [6.0, 12.0])
    attributes = {t.attribute: t.value for t in tuples}
    assert attributes["transmission power set"] == "6W,12W"

    with pytest.raises(ValidationError):
        experiment_intent_tuples(EnvSection().intent(1), None, 16, 1.0)


def test_encoder_batch_shape(tiny_encoder):
    """Batches stack one feature per (intent, power) row."""
    batch = tiny_encoder.batch(np.array([1, 2, 5]), np.array([6.0, 30.0, 6.0]))
    assert batch.shape == (3, 4, 16)
    np.testing.assert_array_equal(batch[0], tiny_encoder.feature(1, 6.0).matrix)


def test_mixed_entities_rejected():
    """Tuples describing different entities cannot share a feature."""
    tuples = [
        EavTuple(entity="BS", attribute="noise", value="1"),
        EavTuple(entity="UAV", attribute="user scale", value="16"),
    ]
    with pytest.raises(ValidationError):
        encode_intent(tuples, EmbeddingTable(seed=0))


def test_unknown_attribute_rejected():
    """Attributes outside the vocabulary raise a vocabulary error."""
    with pytest.raises(VocabularyError):
        encode_intent([EavTuple(entity="BS", attribute="weather", value="rain")], EmbeddingTable(seed=0))


def test_empty_and_repeated_attributes_rejected():
    """Empty descriptions and repeated attributes are invalid."""
    with pytest.raises(ValidationError):
        encode_intent([], EmbeddingTable(seed=0))
    repeated = [EavTuple(entity="BS", attribute="noise", value=v) for v in ("1", "2")]
    with pytest.raises(ValidationError):
        encode_intent(repeated, EmbeddingTable(seed=0))


def test_encoder_unknown_intent(tiny_encoder):
    """Only configured intents have descriptions."""
    with pytest.raises(VocabularyError):
        tiny_encoder.feature(9, 6.0)


def test_load_intent_description(tmp_path):
    """Description files round-trip through the JSON document form."""
    tuples = experiment_intent_tuples(EnvSection().intent(4), 24.0, 16, 1.0)
    path = tmp_path / "intent.json"
    path.write_text(json.dumps(intent_description_document(tuples)))

    assert load_intent_description(path) == tuples


def test_load_intent_description_rejects_bad_documents(tmp_path):
    """Malformed or schema-violating documents are format errors."""
    broken = tmp_path / "broken.json"
    broken.write_text('{"entity": "BS", "attributes": [')
    with pytest.raises(ArtifactFormatError):
        load_intent_description(broken)

    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"entity": "BS", "attributes": []}))
    with pytest.raises(ArtifactFormatError):
        load_intent_description(invalid)


def test_propagation_description_encodes(tmp_path):
    """A file naming path loss, LoS odds and interference encodes one row per tuple."""
    document = {
        "entity": "BS",
        "attributes": [
            {"name": "los path loss", "value": "28+22log10(d)+20log10(fc)"},
            {"name": "nlos path loss", "value": "32.4+30log10(d)+20log10(fc)"},
            {"name": "los probability", "value": "0.8"},
            {"name": "nlos probability", "value": "0.2"},
            {"name": "interference", "value": "-100dBm"},
            {"name": "transmission power", "value": "18W"},
        ],
    }
    path = tmp_path / "urban.json"
    path.write_text(json.dumps(document))
    table = EmbeddingTable(seed=7, dim=8)

    tuples = load_intent_description(path)
    feature = encode_intent(tuples, table)

    assert feature.matrix.shape == (6, 16)
    assert feature.attributes == tuple(sorted(a["name"] for a in document["attributes"]))
    quiet = encode_intent([t for t in tuples if t.attribute != "interference"], table)
    assert quiet.rows == 5
    keep = [i for i, name in enumerate(feature.attributes) if name != "interference"]
    np.testing.assert_array_equal(quiet.matrix, feature.matrix[keep])
