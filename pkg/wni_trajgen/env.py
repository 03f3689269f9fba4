"""
Multi-channel power allocation environment.

Channel gains are linear, SNR-normalized values drawn uniformly inside the
active intent's range. The next state is an independent redraw from the same
intent, independent of the action.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .config import EnvSection
from .errors import DomainError, FeasibilityError
from .models import IntentSpec

logger = logging.getLogger(__name__)

# Relative slack when checking the total-power constraint.
POWER_TOLERANCE = 1e-9
# Intent ranges opening at 0 are sampled from (0, high); gains below this are lifted.
MIN_GAIN = 1e-12


@dataclass(frozen=True)
class PathLossParams:
    """Distance-dependent path-loss model parameters."""

    c0: float  # loss at the reference distance, dB
    gamma_pl: float  # path-loss exponent
    d: float  # link distance, m
    d0: float = 1.0  # reference distance, m
    g_t: float = 0.0  # transmit antenna gain, dB
    g_r: float = 0.0  # receive antenna gain, dB


@dataclass
class EnvState:
    """Channel gains observed under one intent."""

    gains: np.ndarray
    intent_id: int


def path_loss_db(params: PathLossParams) -> float:
    """L(d) = C0 * (d / D0)^(-gamma), in dB."""
    if params.d <= 0:
        raise DomainError(f"Link distance must be positive, got {params.d}")
    if params.d0 <= 0 or params.gamma_pl <= 0:
        raise DomainError(
            "Reference distance and path-loss exponent must be positive",
            context={"d0": params.d0, "gamma_pl": params.gamma_pl},
        )
    return params.c0 * (params.d / params.d0) ** (-params.gamma_pl)


def path_loss_gain(params: PathLossParams) -> float:
    """Linear channel gain 10^((G_t + G_r - L(d)) / 10)."""
    return float(10.0 ** ((params.g_t + params.g_r - path_loss_db(params)) / 10.0))


def intent_from_path_loss(params: PathLossParams, intents: Iterable[IntentSpec]) -> Optional[IntentSpec]:
    """Intent whose gain range contains the path-loss gain, or None."""
    gain = path_loss_gain(params)
    for spec in intents:
        if spec.gain_low <= gain < spec.gain_high and gain > 0:
            return spec
    return None


def sample_gain_matrix(spec: IntentSpec, count: int, num_channels: int, rng: np.random.Generator) -> np.ndarray:
    """(count, num_channels) i.i.d. uniform gains in [gain_low, gain_high)."""
    gains = rng.uniform(spec.gain_low, spec.gain_high, size=(count, num_channels))
    if spec.gain_low <= 0:
        np.maximum(gains, MIN_GAIN, out=gains)
    return gains


def sample_gains(spec: IntentSpec, config: EnvSection, rng: np.random.Generator) -> EnvState:
    """Draw one state of ``config.num_channels`` gains for the intent."""
    gains = sample_gain_matrix(spec, 1, config.num_channels, rng)[0]
    return EnvState(gains=gains, intent_id=spec.intent_id)


def per_channel_rates(gains: np.ndarray, powers: np.ndarray, n0: float) -> np.ndarray:
    """log2(1 + g * p / n0) element-wise; rejects negative powers."""
    gains = np.asarray(gains, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    if gains.shape != powers.shape:
        raise DomainError(f"Gain and power shapes differ: {gains.shape} vs {powers.shape}")
    if np.any(powers < 0):
        raise DomainError("Negative transmit power", context={"min_power": float(powers.min())})
    return np.log2(1.0 + gains * powers / n0)


def spectral_efficiency(gains: np.ndarray, powers: np.ndarray, n0: float = 1.0) -> float:
    """Total spectral efficiency sum_m log2(1 + g_m p_m / n0), in bits/s/Hz."""
    return float(per_channel_rates(gains, powers, n0).sum())


def check_feasible(action: np.ndarray, total_power: float) -> None:
    """Raise FeasibilityError unless p_m >= 0 for all m and sum p_m <= P."""
    action = np.asarray(action, dtype=np.float64)
    if not np.all(np.isfinite(action)):
        raise FeasibilityError("Action contains non-finite powers", constraint="finite")
    if np.any(action < 0):
        raise FeasibilityError(
            "Negative power allocation",
            constraint="non-negative power",
            context={"min_power": float(action.min())},
        )
    total = float(action.sum())
    if total > total_power * (1.0 + POWER_TOLERANCE):
        raise FeasibilityError(
            "Total power budget exceeded",
            constraint="total power",
            context={"allocated": total, "budget": total_power},
        )


def env_step(
    state: EnvState,
    action: np.ndarray,
    config: EnvSection,
    rng: np.random.Generator,
    total_power: float,
) -> Tuple[np.ndarray, EnvState]:
    """
    Apply a power allocation.

    Returns:
        Per-channel rate vector and the next state, redrawn from the same intent
    """
    check_feasible(action, total_power)
    reward_vec = per_channel_rates(state.gains, action, config.noise_power)
    next_state = sample_gains(config.intent(state.intent_id), config, rng)
    return reward_vec, next_state


class PowerAllocationEnv:
    """Stateful wrapper holding the intent, power budget and RNG of one rollout."""

    def __init__(self, config: EnvSection, intent_id: int, total_power: float, rng: np.random.Generator):
        if total_power <= 0:
            raise DomainError(f"Total power must be positive, got {total_power}")
        self.config = config
        self.spec = config.intent(intent_id)
        self.total_power = float(total_power)
        self.rng = rng
        self.state: Optional[EnvState] = None

    @property
    def num_channels(self) -> int:
        return self.config.num_channels

    def reset(self) -> EnvState:
        self.state = sample_gains(self.spec, self.config, self.rng)
        return self.state

    def step(self, action: np.ndarray) -> Tuple[np.ndarray, EnvState]:
        if self.state is None:
            self.reset()
        reward_vec, self.state = env_step(self.state, action, self.config, self.rng, self.total_power)
        return reward_vec, self.state

    def state_sequence(self, steps: int) -> List[EnvState]:
        """States visited over ``steps`` transitions; valid because dynamics ignore actions."""
        states = [self.reset()]
        for _ in range(steps - 1):
            states.append(sample_gains(self.spec, self.config, self.rng))
        return states
