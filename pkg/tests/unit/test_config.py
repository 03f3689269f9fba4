"""
Tests for configuration module.
"""

import json
import os
from unittest.mock import patch

import pytest

from wni_trajgen.config import EnvSection, GdmSection, RunConfig, default_out_dir
from wni_trajgen.errors import ConfigurationError


def test_defaults():
    """Defaults describe the five-intent, sixteen-channel setup."""
    config = RunConfig()

    assert config.env.num_channels == 16
    assert [spec.intent_id for spec in config.env.intents] == [1, 2, 3, 4, 5]
    assert config.env.intents[0].gain_low == 0.0
    assert config.env.intents[-1].gain_high == 50.0
    assert config.gdm.timesteps == 5
    assert config.bcq.gamma == 0.1
    assert config.bcq.lam == 0.75
    assert config.bcq.max_perturbation == 0.05
    assert config.bcq.kl_weight == 1.0
    assert config.baseline.soft_update == 0.005


def test_config_hash_is_stable():
    """Equal configurations hash equally; any change alters the hash."""
    assert RunConfig().config_hash() == RunConfig().config_hash()
    assert RunConfig().config_hash() != RunConfig(seed=1).config_hash()


def test_with_overrides_validates():
    """Overrides go through validation."""
    assert RunConfig().with_overrides(seed=5).seed == 5
    with pytest.raises(ConfigurationError):
        RunConfig().with_overrides(seed=-1)


def test_validators():
    """Invalid sections are rejected."""
    with pytest.raises(ValueError):
        GdmSection(time_dim=15)
    with pytest.raises(ValueError):
        GdmSection(beta_start=0.02, beta_end=0.01)
    with pytest.raises(ValueError):
        EnvSection(total_power_options=[6.0, -1.0])
    with pytest.raises(ValueError):
        EnvSection(
            intents=[
                {"intent_id": 1, "gain_low": 0.0, "gain_high": 10.0},
                {"intent_id": 2, "gain_low": 5.0, "gain_high": 15.0},
            ]
        )
    with pytest.raises(ValueError):
        RunConfig.model_validate({"eval": {"powers": [7.0]}})


def test_unknown_intent():
    """Looking up an unconfigured intent is a configuration error."""
    with pytest.raises(ConfigurationError):
        EnvSection().intent(6)


def test_from_file(tmp_path):
    """Partial documents fill in defaults."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 11, "gdm": {"steps": 7}}))

    config = RunConfig.from_file(path)

    assert config.seed == 11
    assert config.gdm.steps == 7
    assert config.gdm.hidden_dim == 64


def test_from_file_errors(tmp_path):
    """Missing, malformed and invalid documents are configuration errors."""
    with pytest.raises(ConfigurationError):
        RunConfig.from_file(tmp_path / "absent.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigurationError):
        RunConfig.from_file(broken)

    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"bcq": {"gamma": 1.5}}))
    with pytest.raises(ConfigurationError):
        RunConfig.from_file(invalid)


def test_from_env(tmp_path):
    """Test creating config from environment variables."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 2}))
    env_vars = {
        "WNI_TRAJGEN_CONFIG": str(path),
        "WNI_TRAJGEN_SEED": "17",
        "WNI_TRAJGEN_THREADS": "3",
        "WNI_TRAJGEN_OUT": str(tmp_path / "artifacts"),
    }

    with patch.dict(os.environ, env_vars):
        config = RunConfig.from_env()

        assert config.seed == 17
        assert config.threads == 3
        assert default_out_dir() == tmp_path / "artifacts"


def test_from_env_explicit_path_wins(tmp_path):
    """An explicit path overrides WNI_TRAJGEN_CONFIG."""
    explicit = tmp_path / "explicit.json"
    explicit.write_text(json.dumps({"seed": 4}))

    with patch.dict(os.environ, {"WNI_TRAJGEN_CONFIG": str(tmp_path / "absent.json")}):
        assert RunConfig.from_env(explicit).seed == 4


def test_from_env_bad_values():
    """A non-integer seed is an error; a non-integer thread count is ignored."""
    with patch.dict(os.environ, {"WNI_TRAJGEN_SEED": "abc"}):
        with pytest.raises(ConfigurationError):
            RunConfig.from_env()

    with patch.dict(os.environ, {"WNI_TRAJGEN_THREADS": "many"}):
        assert RunConfig.from_env().threads == 1
