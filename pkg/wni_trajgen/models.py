"""
Data models for trajectories, intents and knowledge-base records.
"""

from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ELEMENT_TYPES: Tuple[str, ...] = ("s", "a", "r", "s_next")


class IntentSpec(BaseModel):
    """Channel-gain range that defines one wireless network intent."""

    intent_id: int = Field(..., ge=1, description="Intent identifier (1-based)")
    gain_low: float = Field(..., ge=0.0, description="Lower edge of the linear gain range")
    gain_high: float = Field(..., description="Upper edge of the linear gain range (exclusive)")
    label: str = Field("", description="Human readable scenario label")

    @model_validator(mode="after")
    def validate_range(self) -> "IntentSpec":
        """Ensure the gain range is non-empty."""
        if not self.gain_low < self.gain_high:
            raise ValueError(
                f"Intent {self.intent_id}: gain_low ({self.gain_low}) must be below "
                f"gain_high ({self.gain_high})"
            )
        return self

    @property
    def bucket_token(self) -> str:
        """Value token naming the gain bucket, e.g. ``[10,20)``."""
        left = "(" if self.gain_low == 0 else "["
        return f"{left}{self.gain_low:g},{self.gain_high:g})"


def default_intents() -> List[IntentSpec]:
    """The five experiment intents partitioning (0, 50)."""
    labels = [
        "low channel gain scenario",
        "lower channel gain scenario",
        "medium channel gain scenario",
        "high channel gain scenario",
        "very high channel gain scenario",
    ]
    return [
        IntentSpec(intent_id=i + 1, gain_low=10.0 * i, gain_high=10.0 * (i + 1), label=label)
        for i, label in enumerate(labels)
    ]


class Trajectory(BaseModel):
    """One MDP transition (s, a, r, s') tagged with its intent."""

    model_config = ConfigDict(populate_by_name=True)

    intent: int = Field(..., ge=1, description="Intent identifier")
    s: List[float] = Field(..., description="Channel gains")
    a: List[float] = Field(..., description="Allocated powers")
    r: List[float] = Field(..., description="Per-channel rates in bits/s/Hz")
    s_next: List[float] = Field(..., description="Next channel gains")
    power: Optional[float] = Field(None, description="Total power budget of the transition")

    @model_validator(mode="after")
    def validate_lengths(self) -> "Trajectory":
        """All element vectors share the channel count."""
        lengths = {len(self.s), len(self.a), len(self.r), len(self.s_next)}
        if len(lengths) != 1:
            raise ValueError(f"Trajectory element lengths differ: {sorted(lengths)}")
        return self


class ElementStats(BaseModel):
    """Global z-score moments of one element type."""

    mean: float
    std: float = Field(..., gt=0.0)


class Bkb(BaseModel):
    """Background knowledge base: normalization moments plus per-intent bounds."""

    format_version: int = 1
    mean: Dict[str, float] = Field(..., description="Global mean per element type")
    std: Dict[str, float] = Field(..., description="Global standard deviation per element type")
    bounds: Dict[str, Dict[str, Tuple[float, float]]] = Field(
        ..., description="Normalized [alpha, beta] per intent key and element type"
    )
    meta: Dict[str, Any] = Field(default_factory=dict, description="Provenance metadata")

    @field_validator("std")
    @classmethod
    def validate_std(cls, v: Dict[str, float]) -> Dict[str, float]:
        """Every element type needs a strictly positive spread."""
        for element, value in v.items():
            if not value > 0:
                raise ValueError(f"std for element '{element}' must be positive, got {value}")
        return v

    @staticmethod
    def intent_key(intent_id: int) -> str:
        return f"intent_{intent_id}"

    def intent_ids(self) -> List[int]:
        return sorted(int(key.split("_", 1)[1]) for key in self.bounds)


class EavTuple(BaseModel):
    """Entity-attribute-value triple describing one aspect of a scenario."""

    entity: str = Field(..., min_length=1)
    attribute: str = Field(..., min_length=1)
    value: str = Field(..., min_length=1)


class MetricsRow(BaseModel):
    """One evaluation sample in the long-format metrics table."""

    scheme: str
    intent_id: int
    total_power: float
    step: int
    spectral_efficiency: float
    seed: int
    config_hash: str = ""


class GradCheckReport(BaseModel):
    """Outcome of a finite-difference gradient check."""

    max_relative_error: float
    worst_parameter: Optional[str] = None
    checked: int = 0
    tolerance: float
    passed: bool
