"""
Columnar storage for trajectory datasets.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import BkbLookupError, ConfigurationError
from .models import ELEMENT_TYPES, Trajectory


@dataclass
class TrajectoryDataset:
    """(s, a, r, s') tuples as (N, M) arrays plus per-row intent and power."""

    intent: np.ndarray
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    power: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.intent = np.asarray(self.intent, dtype=np.int64).reshape(-1)
        n = self.intent.shape[0]
        for name in ELEMENT_TYPES:
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.ndim == 1 and n == 0:
                value = value.reshape(0, 0)
            if value.ndim != 2 or value.shape[0] != n:
                raise ConfigurationError(
                    f"Element '{name}' must have shape ({n}, M), got {value.shape}"
                )
            setattr(self, name, value)
        self.power = np.asarray(self.power, dtype=np.float64).reshape(-1)
        if self.power.shape[0] != n:
            raise ConfigurationError(f"power has {self.power.shape[0]} rows, expected {n}")
        widths = {getattr(self, name).shape[1] for name in ELEMENT_TYPES}
        if n and len(widths) != 1:
            raise ConfigurationError(f"Element widths differ: {sorted(widths)}")

    def __len__(self) -> int:
        return int(self.intent.shape[0])

    @property
    def num_channels(self) -> int:
        return int(self.s.shape[1]) if len(self) else 0

    def element(self, name: str) -> np.ndarray:
        if name not in ELEMENT_TYPES:
            raise BkbLookupError(f"Unknown element type '{name}'", context={"known": ELEMENT_TYPES})
        return getattr(self, name)

    def select(self, indices: Sequence[int]) -> "TrajectoryDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return TrajectoryDataset(
            intent=self.intent[idx],
            s=self.s[idx],
            a=self.a[idx],
            r=self.r[idx],
            s_next=self.s_next[idx],
            power=self.power[idx],
            meta=dict(self.meta),
        )

    def for_intent(self, intent_id: int) -> "TrajectoryDataset":
        return self.select(np.flatnonzero(self.intent == intent_id))

    def with_elements(self, **elements: np.ndarray) -> "TrajectoryDataset":
        """Copy with some element arrays replaced."""
        values = {name: elements.get(name, getattr(self, name)) for name in ELEMENT_TYPES}
        return TrajectoryDataset(
            intent=self.intent.copy(), power=self.power.copy(), meta=dict(self.meta), **values
        )

    def to_records(self) -> List[Trajectory]:
        records = []
        for i in range(len(self)):
            power = float(self.power[i])
            records.append(
                Trajectory(
                    intent=int(self.intent[i]),
                    s=self.s[i].tolist(),
                    a=self.a[i].tolist(),
                    r=self.r[i].tolist(),
                    s_next=self.s_next[i].tolist(),
                    power=None if np.isnan(power) else power,
                )
            )
        return records

    @classmethod
    def from_records(
        cls, records: Iterable[Trajectory], meta: Optional[Dict[str, Any]] = None
    ) -> "TrajectoryDataset":
        records = list(records)
        if not records:
            return cls.empty(0, meta=meta)
        return cls(
            intent=np.array([t.intent for t in records]),
            s=np.array([t.s for t in records]),
            a=np.array([t.a for t in records]),
            r=np.array([t.r for t in records]),
            s_next=np.array([t.s_next for t in records]),
            power=np.array([np.nan if t.power is None else t.power for t in records]),
            meta=dict(meta or {}),
        )

    @classmethod
    def empty(cls, num_channels: int, meta: Optional[Dict[str, Any]] = None) -> "TrajectoryDataset":
        blank = np.zeros((0, num_channels))
        return cls(
            intent=np.zeros(0, dtype=np.int64),
            s=blank,
            a=blank.copy(),
            r=blank.copy(),
            s_next=blank.copy(),
            power=np.zeros(0),
            meta=dict(meta or {}),
        )

    @classmethod
    def concat(cls, parts: Sequence["TrajectoryDataset"]) -> "TrajectoryDataset":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(0)
        return cls(
            intent=np.concatenate([p.intent for p in parts]),
            s=np.concatenate([p.s for p in parts]),
            a=np.concatenate([p.a for p in parts]),
            r=np.concatenate([p.r for p in parts]),
            s_next=np.concatenate([p.s_next for p in parts]),
            power=np.concatenate([p.power for p in parts]),
            meta=dict(parts[0].meta),
        )
