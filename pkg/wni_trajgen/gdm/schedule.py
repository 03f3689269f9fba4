"""
Linear DDPM noise schedule and the closed-form forward process.

Steps are 1-based: ``t`` runs over 1..T and indexes ``beta[t - 1]``.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..config import GdmSection
from ..errors import ConfigurationError, DomainError

StepIndex = Union[int, np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @classmethod
    def linear(cls, timesteps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> "NoiseSchedule":
        if timesteps < 1:
            raise ConfigurationError(f"Need at least one diffusion step, got {timesteps}")
        if not 0.0 < beta_start <= beta_end < 1.0:
            raise ConfigurationError(
                "Betas must satisfy 0 < beta_start <= beta_end < 1",
                context={"beta_start": beta_start, "beta_end": beta_end},
            )
        beta = np.linspace(beta_start, beta_end, timesteps)
        alpha = 1.0 - beta
        return cls(beta=beta, alpha=alpha, alpha_bar=np.cumprod(alpha))

    @classmethod
    def from_config(cls, config: GdmSection) -> "NoiseSchedule":
        return cls.linear(config.timesteps, config.beta_start, config.beta_end)

    @property
    def timesteps(self) -> int:
        return int(self.beta.shape[0])

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.beta)

    def index(self, t: StepIndex) -> np.ndarray:
        """Zero-based index of step ``t``; rejects steps outside 1..T."""
        steps = np.asarray(t, dtype=np.int64)
        if np.any(steps < 1) or np.any(steps > self.timesteps):
            raise DomainError(
                f"Diffusion step must lie in 1..{self.timesteps}",
                context={"t": steps.tolist()},
            )
        return steps - 1

    def to_dict(self) -> dict:
        return {
            "timesteps": self.timesteps,
            "beta_start": float(self.beta[0]),
            "beta_end": float(self.beta[-1]),
        }


def _per_row(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Scalars broadcast directly; per-sample vectors become a column.
    return values if values.ndim == 0 else values.reshape(-1, *([1] * (x.ndim - 1)))


def forward_diffuse(x0: np.ndarray, t: StepIndex, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise DomainError(f"Noise shape {eps.shape} does not match data shape {x0.shape}")
    alpha_bar = _per_row(schedule.alpha_bar[schedule.index(t)], x0)
    return np.sqrt(alpha_bar) * x0 + np.sqrt(1.0 - alpha_bar) * eps


def predict_x0(x_t: np.ndarray, t: StepIndex, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Invert ``forward_diffuse`` for known noise."""
    x_t = np.asarray(x_t, dtype=np.float64)
    alpha_bar = _per_row(schedule.alpha_bar[schedule.index(t)], x_t)
    return (x_t - np.sqrt(1.0 - alpha_bar) * np.asarray(eps, dtype=np.float64)) / np.sqrt(alpha_bar)


def posterior_mean(x_t: np.ndarray, t: int, eps_hat: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """(1 / sqrt(alpha_t)) (x_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) eps_hat)."""
    i = int(schedule.index(t))
    alpha = schedule.alpha[i]
    coef = (1.0 - alpha) / np.sqrt(1.0 - schedule.alpha_bar[i])
    return (np.asarray(x_t, dtype=np.float64) - coef * np.asarray(eps_hat, dtype=np.float64)) / np.sqrt(alpha)
