"""
Configuration module for the WNI-guided trajectory generation pipeline.

Defaults describe the sixteen-channel, five-intent simulation; every
field can be overridden from a JSON document or from the environment.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from .errors import ConfigurationError
from .models import IntentSpec, default_intents

# Load environment variables from a .env file if it exists
load_dotenv()

logger = logging.getLogger(__name__)


class EnvSection(BaseModel):
    """Multi-channel power allocation environment."""

    num_channels: int = Field(16, ge=1, description="Number of channels")
    noise_power: float = Field(1.0, gt=0.0, description="Normalized noise power")
    total_power_options: List[float] = Field(
        default_factory=lambda: [6.0, 12.0, 18.0, 24.0, 30.0],
        description="Total transmission power configurations in watts",
    )
    episode_length: int = Field(200, ge=1, description="Steps per evaluation episode")
    intents: List[IntentSpec] = Field(default_factory=default_intents)

    @field_validator("total_power_options")
    @classmethod
    def validate_powers(cls, v: List[float]) -> List[float]:
        """Every total power budget must be positive."""
        if not v:
            raise ValueError("total_power_options must not be empty")
        for p in v:
            if not p > 0:
                raise ValueError(f"total power must be positive, got {p}")
        return v

    @field_validator("intents")
    @classmethod
    def validate_intents(cls, v: List[IntentSpec]) -> List[IntentSpec]:
        """Intent ids are unique and ranges are ordered without overlap."""
        ids = [spec.intent_id for spec in v]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate intent ids: {ids}")
        ordered = sorted(v, key=lambda spec: spec.gain_low)
        for prev, nxt in zip(ordered, ordered[1:]):
            if nxt.gain_low < prev.gain_high:
                raise ValueError(
                    f"intent ranges overlap: {prev.intent_id} and {nxt.intent_id}"
                )
        return v

    def intent(self, intent_id: int) -> IntentSpec:
        for spec in self.intents:
            if spec.intent_id == intent_id:
                return spec
        raise ConfigurationError(
            f"Unknown intent id {intent_id}",
            context={"known": [s.intent_id for s in self.intents]},
        )


class ExpertSection(BaseModel):
    """Expert trajectory collection."""

    count_per_intent: int = Field(10000, ge=1, description="Water-filling trajectories per intent")


class GdmSection(BaseModel):
    """AMLP-based diffusion model."""

    timesteps: int = Field(5, ge=1, description="Diffusion steps")
    beta_start: float = Field(1e-4, gt=0.0, lt=1.0)
    beta_end: float = Field(0.02, gt=0.0, lt=1.0)
    hidden_dim: int = Field(64, ge=1)
    heads: int = Field(4, ge=1)
    head_dim: int = Field(8, ge=1)
    wni_dim: int = Field(16, ge=1, description="Embedding width of one WNI token")
    time_dim: int = Field(16, ge=2)
    layers: int = Field(4, ge=2, description="Dense layers per AMLP network")
    learning_rate: float = Field(2e-4, gt=0.0)
    steps: int = Field(2000, ge=0, description="Training iterations")
    batch_size: int = Field(64, ge=1, description="Mini-batch size")
    generate_count: int = Field(1600, ge=0, description="Trajectories generated per target")
    log_every: int = Field(100, ge=1)

    @field_validator("time_dim")
    @classmethod
    def validate_time_dim(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"time_dim must be even, got {v}")
        return v

    @model_validator(mode="after")
    def validate_betas(self) -> "GdmSection":
        if self.beta_end < self.beta_start:
            raise ValueError("beta_end must not be below beta_start")
        return self


class BcqSection(BaseModel):
    """Batch-constrained offline learner."""

    gamma: float = Field(0.1, ge=0.0, lt=1.0, description="Discount factor")
    lam: float = Field(0.75, ge=0.0, le=1.0, description="Clipped double-Q weighting")
    max_perturbation: float = Field(0.05, ge=0.0, description="Bound on the action perturbation")
    batch_size: int = Field(100, ge=1, description="Mini-batch size")
    iterations: int = Field(2000, ge=0, description="Training iterations")
    candidates: int = Field(10, ge=1, description="Sampled candidate actions")
    soft_update: float = Field(0.1, ge=0.0, le=1.0)
    hidden_dim: int = Field(32, ge=1)
    vae_hidden_dim: int = Field(64, ge=1)
    actor_lr: float = Field(2e-4, gt=0.0)
    critic_lr: float = Field(1e-4, gt=0.0)
    kl_weight: float = Field(1.0, ge=0.0)
    finetune_steps: int = Field(200, ge=0)
    finetune_real_fraction: float = Field(0.5, ge=0.0, le=1.0)
    log_every: int = Field(200, ge=1)


class BaselineSection(BaseModel):
    """DDPG online baseline."""

    steps: int = Field(2000, ge=1)
    actor_lr: float = Field(2e-4, gt=0.0)
    critic_lr: float = Field(1e-4, gt=0.0)
    soft_update: float = Field(0.005, ge=0.0, le=1.0)
    batch_size: int = Field(64, ge=1)
    buffer_capacity: int = Field(100000, ge=1)
    hidden_dim: int = Field(64, ge=1)
    gamma: float = Field(0.1, ge=0.0, lt=1.0)
    noise_scale: float = Field(0.1, ge=0.0, description="Initial noise std as a fraction of P/M")
    noise_final_fraction: float = Field(0.1, ge=0.0, le=1.0)
    reward_scale: float = Field(0.05, gt=0.0)


class EvalSection(BaseModel):
    """Paired evaluation protocol."""

    episodes: int = Field(1, ge=1)
    steps: int = Field(200, ge=1, description="Steps per evaluation episode")
    intents: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    powers: List[float] = Field(default_factory=lambda: [6.0, 12.0, 18.0, 24.0, 30.0])
    seeds: List[int] = Field(default_factory=lambda: [0])
    schemes: List[str] = Field(default_factory=lambda: ["uniform", "oracle", "bcq", "ddpg"])

    @field_validator("schemes")
    @classmethod
    def validate_schemes(cls, v: List[str]) -> List[str]:
        known = {"uniform", "oracle", "bcq", "ddpg"}
        unknown = [s for s in v if s not in known]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; expected a subset of {sorted(known)}")
        return v


class RunConfig(BaseModel):
    """Complete configuration of one pipeline run."""

    seed: int = Field(0, ge=0, description="Master seed for every RNG stream")
    embedding_seed: int = Field(7, ge=0, description="Seed of the WNI embedding table")
    threads: int = Field(1, ge=1, description="Worker cap for independent per-cell work")
    env: EnvSection = Field(default_factory=EnvSection)
    expert: ExpertSection = Field(default_factory=ExpertSection)
    gdm: GdmSection = Field(default_factory=GdmSection)
    bcq: BcqSection = Field(default_factory=BcqSection)
    baseline: BaselineSection = Field(default_factory=BaselineSection)
    eval: EvalSection = Field(default_factory=EvalSection)

    @model_validator(mode="after")
    def validate_eval_cells(self) -> "RunConfig":
        """Evaluation cells must reference configured intents and powers."""
        known_ids = {spec.intent_id for spec in self.env.intents}
        missing = [i for i in self.eval.intents if i not in known_ids]
        if missing:
            raise ValueError(f"eval.intents {missing} are not configured in env.intents")
        unknown_powers = [p for p in self.eval.powers if p not in self.env.total_power_options]
        if unknown_powers:
            raise ValueError(f"eval.powers {unknown_powers} are not in env.total_power_options")
        return self

    def canonical_json(self) -> str:
        """Sorted, whitespace-free JSON used for hashing."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """SHA-256 of the canonical configuration."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a validated copy with top-level fields replaced."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return load_config_dict(data)

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        """Load a configuration JSON document; missing fields take defaults."""
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigurationError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {e}")
        logger.info(f"Loaded configuration from {path}")
        return load_config_dict(data)

    @classmethod
    def from_env(cls, config_path: Optional[Path] = None) -> "RunConfig":
        """
        Create a configuration from environment variables.

        An explicit ``config_path`` takes precedence over WNI_TRAJGEN_CONFIG.
        """
        config_path = config_path or os.environ.get("WNI_TRAJGEN_CONFIG")
        config = cls.from_file(Path(config_path)) if config_path else cls()

        overrides: Dict[str, Any] = {}
        seed = os.environ.get("WNI_TRAJGEN_SEED")
        if seed is not None:
            try:
                overrides["seed"] = int(seed)
            except ValueError:
                raise ConfigurationError(f"WNI_TRAJGEN_SEED must be an integer, got '{seed}'")

        threads = os.environ.get("WNI_TRAJGEN_THREADS")
        if threads is not None:
            try:
                overrides["threads"] = max(1, int(threads))
            except ValueError:
                logger.warning(f"Ignoring non-integer WNI_TRAJGEN_THREADS='{threads}'")

        return config.with_overrides(**overrides) if overrides else config


def load_config_dict(data: Dict[str, Any]) -> RunConfig:
    """Validate a raw mapping into a RunConfig, raising ConfigurationError."""
    from pydantic import ValidationError as PydanticValidationError

    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}")


def default_out_dir() -> Optional[Path]:
    """Artifact directory from WNI_TRAJGEN_OUT, if set."""
    out = os.environ.get("WNI_TRAJGEN_OUT")
    return Path(out) if out else None
