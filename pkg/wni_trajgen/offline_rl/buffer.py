"""
Fixed-capacity FIFO replay buffer of raw transitions.
"""

import numpy as np

from ..dataset import TrajectoryDataset
from ..errors import ValidationError


class ReplayBuffer:
    """Ring buffer over (s, a, r, s') rows; the oldest row is evicted first."""

    def __init__(self, capacity: int, num_channels: int, intent_id: int = 1, total_power: float = float("nan")):
        if capacity < 1:
            raise ValidationError(f"Buffer capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.intent_id = intent_id
        self.total_power = total_power
        self._s = np.zeros((capacity, num_channels))
        self._a = np.zeros((capacity, num_channels))
        self._r = np.zeros((capacity, num_channels))
        self._s_next = np.zeros((capacity, num_channels))
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, s: np.ndarray, a: np.ndarray, r: np.ndarray, s_next: np.ndarray) -> None:
        i = self._cursor
        self._s[i], self._a[i], self._r[i], self._s_next[i] = s, a, r, s_next
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _rows(self, idx: np.ndarray) -> TrajectoryDataset:
        return TrajectoryDataset(
            intent=np.full(idx.size, self.intent_id),
            s=self._s[idx],
            a=self._a[idx],
            r=self._r[idx],
            s_next=self._s_next[idx],
            power=np.full(idx.size, self.total_power),
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> TrajectoryDataset:
        """Uniform sample with replacement."""
        if self._size == 0:
            raise ValidationError("Cannot sample from an empty replay buffer")
        return self._rows(rng.integers(0, self._size, size=batch_size))

    def contents(self) -> TrajectoryDataset:
        """Stored rows from oldest to newest."""
        if self._size < self.capacity:
            order = np.arange(self._size)
        else:
            order = (np.arange(self.capacity) + self._cursor) % self.capacity
        return self._rows(order)
