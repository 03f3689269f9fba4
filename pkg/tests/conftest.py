"""
Pytest fixtures for testing.
"""

import os

import numpy as np
import pytest

from wni_trajgen.config import RunConfig
from wni_trajgen.expert import build_bkb, collect_expert
from wni_trajgen.wni import EmbeddingTable, WniEncoder


def pytest_collection_modifyitems(config, items):
    """Skip slow acceptance runs unless WNI_TRAJGEN_RUN_SLOW=1."""
    if os.environ.get("WNI_TRAJGEN_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set WNI_TRAJGEN_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    """Fixed generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> RunConfig:
    """A configuration small enough for unit tests to train every model in seconds."""
    return RunConfig.model_validate(
        {
            "seed": 3,
            "embedding_seed": 7,
            "env": {"num_channels": 4, "total_power_options": [6.0, 30.0]},
            "expert": {"count_per_intent": 40},
            "gdm": {
                "hidden_dim": 16,
                "heads": 2,
                "head_dim": 4,
                "wni_dim": 8,
                "time_dim": 8,
                "steps": 4,
                "batch_size": 16,
                "generate_count": 20,
                "log_every": 2,
            },
            "bcq": {
                "batch_size": 16,
                "iterations": 3,
                "hidden_dim": 8,
                "vae_hidden_dim": 16,
                "candidates": 4,
                "finetune_steps": 3,
                "log_every": 2,
            },
            "baseline": {"steps": 12, "batch_size": 8, "hidden_dim": 8},
            "eval": {"steps": 5, "intents": [1, 3], "powers": [6.0, 30.0]},
        }
    )


@pytest.fixture
def tiny_expert(tiny_config):
    """Raw expert dataset for the tiny configuration."""
    env = tiny_config.env
    return collect_expert(env.intents, env, tiny_config.expert.count_per_intent, np.random.default_rng(5))


@pytest.fixture
def tiny_bkb(tiny_expert):
    """(normalized dataset, knowledge base) built from the tiny expert data."""
    return build_bkb(tiny_expert)


@pytest.fixture
def tiny_encoder(tiny_config) -> WniEncoder:
    """WNI encoder over the tiny configuration's intents."""
    env = tiny_config.env
    table = EmbeddingTable(tiny_config.embedding_seed, tiny_config.gdm.wni_dim)
    return WniEncoder(table, env.intents, env.num_channels, env.noise_power)
