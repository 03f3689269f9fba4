"""
Tests for the reference schemes, the DDPG baseline and paired evaluation.
"""

import numpy as np
import pytest

from wni_trajgen.baselines import (
    DdpgLearner,
    ddpg_train,
    evaluate_policy,
    evaluation_states,
    exploration_std,
    oracle_policy,
    uniform_alloc,
    uniform_policy,
)
from wni_trajgen.config import BaselineSection, EnvSection
from wni_trajgen.env import PowerAllocationEnv, check_feasible, spectral_efficiency
from wni_trajgen.errors import DomainError, FeasibilityError, ValidationError
from wni_trajgen.expert import waterfill


def test_uniform_allocation():
    """Six watts over sixteen channels is 0.375 each."""
    action = uniform_alloc(np.ones(16), 6.0)
    np.testing.assert_allclose(action, np.full(16, 0.375))
    check_feasible(action, 6.0)
    with pytest.raises(DomainError):
        uniform_alloc(np.ones(4), 0.0)


def test_uniform_never_beats_oracle():
    """Water-filling is at least as good as uniform on every sampled state."""
    config = EnvSection(num_channels=8)
    env = PowerAllocationEnv(config, 2, 12.0, np.random.default_rng(0))
    uniform, oracle = uniform_policy(12.0), oracle_policy(12.0)
    for state in env.state_sequence(500):
        gains = state.gains
        best = spectral_efficiency(gains, oracle(gains))
        assert spectral_efficiency(gains, uniform(gains)) <= best + 1e-12


def test_oracle_evaluation_matches_direct_waterfill():
    """Evaluating the oracle reproduces water-filling on the shared states."""
    config = EnvSection(num_channels=4)
    summary = evaluate_policy(oracle_policy(18.0), config, 3, 18.0, episodes=2, steps=6, seed=5)

    expected = []
    for episode in range(2):
        for gains in evaluation_states(config, 3, 18.0, episode, 6, 5):
            expected.append(spectral_efficiency(gains, waterfill(gains, 18.0)))
    assert summary.per_step == expected
    assert summary.mean == pytest.approx(np.mean(expected))


def test_evaluation_states_are_shared_and_deterministic():
    """Every call with the same key gives the same states; other cells differ."""
    config = EnvSection(num_channels=4)
    first = evaluation_states(config, 2, 6.0, 0, 5, 1)
    second = evaluation_states(config, 2, 6.0, 0, 5, 1)
    other = evaluation_states(config, 2, 12.0, 0, 5, 1)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(first[0], other[0])


def test_evaluation_rejects_infeasible_policy():
    """A policy that overspends is caught during evaluation."""
    config = EnvSection(num_channels=2)
    with pytest.raises(FeasibilityError):
        evaluate_policy(lambda gains: np.full(2, 10.0), config, 1, 6.0, episodes=1, steps=2, seed=0)
    with pytest.raises(ValidationError):
        evaluate_policy(uniform_policy(6.0), config, 1, 6.0, episodes=0, steps=2, seed=0)


def test_exploration_noise_decays():
    """Noise starts at noise_scale and ends at the final fraction."""
    config = BaselineSection(noise_scale=0.2, noise_final_fraction=0.1)
    assert exploration_std(0, 11, config) == pytest.approx(0.2)
    assert exploration_std(10, 11, config) == pytest.approx(0.02)
    assert exploration_std(0, 1, config) == pytest.approx(0.2)


def test_ddpg_single_step():
    """One step gives one series entry."""
    config = EnvSection(num_channels=4)
    env = PowerAllocationEnv(config, 3, 6.0, np.random.default_rng(0))
    config = BaselineSection(batch_size=4, hidden_dim=8)
    learner, series = ddpg_train(env, config, np.random.default_rng(1), steps=1)
    assert len(series) == 1
    assert learner.updates == 0


def test_ddpg_actions_feasible_and_deterministic(tiny_config):
    """Training is reproducible and the trained actor acts feasibly."""
    runs = []
    for _ in range(2):
        env = PowerAllocationEnv(tiny_config.env, 3, 30.0, np.random.default_rng(0))
        runs.append(ddpg_train(env, tiny_config.baseline, np.random.default_rng(1)))
    (learner, series), (_, again) = runs

    assert series == again
    assert len(series) == tiny_config.baseline.steps
    assert learner.updates == tiny_config.baseline.steps - tiny_config.baseline.batch_size + 1
    for gains in evaluation_states(tiny_config.env, 3, 30.0, 0, 10, 0):
        check_feasible(learner.act(gains), 30.0)


def test_ddpg_rejects_zero_steps():
    """At least one step is required."""
    env = PowerAllocationEnv(EnvSection(num_channels=2), 1, 6.0, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        ddpg_train(env, BaselineSection(), np.random.default_rng(0), steps=0)


def test_ddpg_scaled_action_respects_budget(rng):
    """Scaled actions sum to at most M before conversion to watts."""
    env = EnvSection(num_channels=5)
    learner = DdpgLearner(env.intent(2), 5, 12.0, BaselineSection(hidden_dim=8), rng)
    states = learner.normalize_states(rng.uniform(10, 20, size=(20, 5)))
    u, raw, _ = learner.scaled_action(learner.actor, states)
    assert np.all(u >= 0) and np.all(u.sum(axis=1) <= 5.0)
    assert np.all(raw >= 0) and np.all(raw <= 5.0)
