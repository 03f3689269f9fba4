"""
Tests for the power allocation environment.
"""

import numpy as np
import pytest

from wni_trajgen.config import EnvSection
from wni_trajgen.env import (
    EnvState,
    PathLossParams,
    PowerAllocationEnv,
    check_feasible,
    env_step,
    intent_from_path_loss,
    path_loss_gain,
    sample_gains,
    spectral_efficiency,
)
from wni_trajgen.errors import DomainError, FeasibilityError
from wni_trajgen.models import default_intents


def test_path_loss_gain():
    """Gain is 10^((G_t + G_r - L) / 10)."""
    assert path_loss_gain(PathLossParams(c0=0.0, gamma_pl=2.0, d=5.0)) == pytest.approx(1.0)
    boosted = PathLossParams(c0=30.0, gamma_pl=3.7, d=1.0, g_t=20.0, g_r=20.0)
    assert path_loss_gain(boosted) == pytest.approx(10.0)


def test_path_loss_rejects_non_positive_distance():
    """Distance must be positive."""
    with pytest.raises(DomainError):
        path_loss_gain(PathLossParams(c0=30.0, gamma_pl=2.0, d=0.0))


def test_intent_from_path_loss():
    """A gain of 10 falls into the [10, 20) intent."""
    params = PathLossParams(c0=30.0, gamma_pl=2.0, d=1.0, g_t=20.0, g_r=20.0)
    spec = intent_from_path_loss(params, default_intents())
    assert spec is not None and spec.intent_id == 2


def test_sampled_gains_stay_in_intent_range():
    """Gains are drawn inside the intent's range."""
    config = EnvSection()
    rng = np.random.default_rng(0)
    low = np.stack([sample_gains(config.intent(1), config, rng).gains for _ in range(2000)])
    high = np.stack([sample_gains(config.intent(5), config, rng).gains for _ in range(200)])

    assert low.min() > 0 and low.max() < 10
    assert 4.9 <= low.mean() <= 5.1
    assert high.min() >= 40 and high.max() < 50


def test_sampling_is_deterministic():
    """Same seed, same states."""
    config = EnvSection()
    first = sample_gains(config.intent(3), config, np.random.default_rng(11)).gains
    second = sample_gains(config.intent(3), config, np.random.default_rng(11)).gains
    np.testing.assert_array_equal(first, second)


def test_spectral_efficiency_examples():
    """Hand-computed spectral efficiencies."""
    assert spectral_efficiency(np.array([2.0, 5.0]), np.zeros(2)) == 0.0
    assert spectral_efficiency(np.array([3.0]), np.array([1.0])) == pytest.approx(2.0)
    waterfilled = spectral_efficiency(np.array([4.0, 1.0]), np.array([0.875, 0.125]))
    assert waterfilled == pytest.approx(2.3399, abs=1e-4)


def test_spectral_efficiency_rejects_negative_power():
    """Negative powers are outside the rate formula's domain."""
    with pytest.raises(DomainError):
        spectral_efficiency(np.array([1.0, 1.0]), np.array([-0.1, 1.0]))


@pytest.mark.parametrize(
    "action,constraint",
    [
        ([-0.5, 1.0], "non-negative power"),
        ([3.0, 4.0], "total power"),
        ([np.nan, 1.0], "finite"),
    ],
)
def test_check_feasible_names_constraint(action, constraint):
    """Infeasible actions report which constraint they violate."""
    with pytest.raises(FeasibilityError) as exc_info:
        check_feasible(np.array(action), 6.0)
    assert exc_info.value.constraint == constraint


def test_env_step_rewards_and_next_state():
    """Rewards add up to the spectral efficiency and the next state keeps the intent."""
    config = EnvSection(num_channels=4)
    rng = np.random.default_rng(2)
    state = sample_gains(config.intent(2), config, rng)
    action = np.array([1.0, 2.0, 0.5, 0.5])

    reward_vec, next_state = env_step(state, action, config, rng, total_power=6.0)

    assert reward_vec.sum() == spectral_efficiency(state.gains, action, config.noise_power)
    assert next_state.intent_id == 2
    assert np.all((next_state.gains >= 10) & (next_state.gains < 20))

    zeros, _ = env_step(state, np.zeros(4), config, rng, total_power=6.0)
    assert np.all(zeros == 0.0)


def test_env_step_rejects_budget_violation():
    """The environment refuses allocations above the budget."""
    config = EnvSection(num_channels=2)
    state = EnvState(gains=np.array([1.0, 2.0]), intent_id=1)
    with pytest.raises(FeasibilityError):
        env_step(state, np.array([4.0, 4.0]), config, np.random.default_rng(0), total_power=6.0)


def test_power_allocation_env_rollout():
    """The stateful wrapper resets on first step and rejects non-positive budgets."""
    config = EnvSection(num_channels=3)
    env = PowerAllocationEnv(config, 4, 12.0, np.random.default_rng(1))
    reward_vec, state = env.step(np.full(3, 4.0))

    assert reward_vec.shape == (3,)
    assert state.intent_id == 4
    assert len(env.state_sequence(7)) == 7

    with pytest.raises(DomainError):
        PowerAllocationEnv(config, 4, 0.0, np.random.default_rng(1))
