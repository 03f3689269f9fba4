"""
Reference allocation schemes and paired evaluation.

Uniform allocation and the water-filling oracle bracket the learned schemes;
DDPG is the online learning baseline. Evaluation draws state sequences from a
stream keyed by (seed, intent, power, episode), so every scheme sees the same
states.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .config import BaselineSection, EnvSection
from .dataset import TrajectoryDataset
from .env import PowerAllocationEnv, check_feasible, spectral_efficiency
from .errors import DivergenceError, DomainError, ValidationError
from .expert import waterfill
from .models import IntentSpec
from .nn import Adam, Mlp, Module
from .offline_rl.buffer import ReplayBuffer
from .offline_rl.feasibility import project_feasible, rescale_backward
from .rng import make_rng

logger = logging.getLogger(__name__)

Policy = Callable[[np.ndarray], np.ndarray]


def uniform_alloc(state: np.ndarray, total_power: float) -> np.ndarray:
    """p_m = P / M."""
    if not total_power > 0:
        raise DomainError(f"Total power must be positive, got {total_power}")
    state = np.asarray(state, dtype=np.float64)
    return np.full(state.shape, total_power / state.shape[-1])


def uniform_policy(total_power: float) -> Policy:
    return lambda state: uniform_alloc(state, total_power)


def oracle_policy(total_power: float, n0: float = 1.0) -> Policy:
    return lambda state: waterfill(state, total_power, n0)


class DdpgLearner(Module):
    """Deterministic actor and critic, with target copies, for one intent and power budget."""

    def __init__(self, spec: IntentSpec, num_channels: int, total_power: float, config: BaselineSection, rng):
        super().__init__()
        self.num_channels = num_channels
        self.total_power = float(total_power)
        self.config = config
        self.state_center = 0.5 * (spec.gain_low + spec.gain_high)
        self.state_halfwidth = 0.5 * (spec.gain_high - spec.gain_low)
        m, h = num_channels, config.hidden_dim
        self.actor = self.register_module("actor", Mlp.build([m, h, h, m], rng, "relu", "tanh"))
        self.actor_target = self.register_module("actor_target", Mlp.build([m, h, h, m], rng, "relu", "tanh"))
        self.critic = self.register_module("critic", Mlp.build([2 * m, h, h, 1], rng))
        self.critic_target = self.register_module("critic_target", Mlp.build([2 * m, h, h, 1], rng))
        self.actor_target.copy_from(self.actor)
        self.critic_target.copy_from(self.critic)
        self.actor_optimizer = Adam(self.actor.parameters(), config.actor_lr)
        self.critic_optimizer = Adam(self.critic.parameters(), config.critic_lr)
        self.updates = 0

    def normalize_states(self, s: np.ndarray) -> np.ndarray:
        return (np.asarray(s, dtype=np.float64) - self.state_center) / self.state_halfwidth

    def scaled_action(self, net: Mlp, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray, list]:
        """Feasible scaled action u (sum <= M), the pre-projection action and the actor cache."""
        out, cache = net.forward(states)
        raw = 0.5 * self.num_channels * (out + 1.0)
        return project_feasible(raw, float(self.num_channels)), raw, cache

    def act(self, state: np.ndarray) -> np.ndarray:
        """Deterministic raw action for one state."""
        u, _, _ = self.scaled_action(self.actor, self.normalize_states(np.atleast_2d(state)))
        return project_feasible(u[0] * self.total_power / self.num_channels, self.total_power)

    def update(self, batch: TrajectoryDataset) -> Tuple[float, float]:
        """One critic and one actor step; returns (critic loss, actor objective)."""
        cfg = self.config
        size = len(batch)
        m = self.num_channels
        states = self.normalize_states(batch.s)
        next_states = self.normalize_states(batch.s_next)
        actions = batch.a * m / self.total_power
        rewards = cfg.reward_scale * batch.r.sum(axis=1)

        next_actions, _, _ = self.scaled_action(self.actor_target, next_states)
        next_q = self.critic_target(np.concatenate([next_states, next_actions], axis=1))[:, 0]
        y = rewards + cfg.gamma * next_q

        q, cache = self.critic.forward(np.concatenate([states, actions], axis=1))
        residual = q[:, 0] - y
        critic_loss = float(np.mean(residual**2))
        self.critic.backward(cache, (2.0 * residual / size)[:, None])
        self.critic_optimizer.step()

        u, raw, actor_cache = self.scaled_action(self.actor, states)
        q_pi, q_cache = self.critic.forward(np.concatenate([states, u], axis=1))
        objective = float(np.mean(q_pi))
        d_inputs = self.critic.backward(q_cache, np.full((size, 1), -1.0 / size))
        self.critic.zero_grad()
        d_raw = rescale_backward(raw, d_inputs[:, m:], float(m))
        self.actor.backward(actor_cache, 0.5 * m * d_raw)
        self.actor_optimizer.step()

        self.actor_target.soft_update_from(self.actor, cfg.soft_update)
        self.critic_target.soft_update_from(self.critic, cfg.soft_update)
        if not (np.isfinite(critic_loss) and np.isfinite(objective)):
            raise DivergenceError(
                "Non-finite DDPG loss", stage="train-baseline", context={"step": self.updates}
            )
        self.updates += 1
        return critic_loss, objective


def exploration_std(step: int, steps: int, config: BaselineSection) -> float:
    """Noise std in scaled units, decayed linearly to ``noise_final_fraction`` of its start."""
    progress = step / (steps - 1) if steps > 1 else 0.0
    return config.noise_scale * (1.0 - (1.0 - config.noise_final_fraction) * progress)


def ddpg_train(
    env: PowerAllocationEnv,
    config: BaselineSection,
    rng: np.random.Generator,
    steps: Optional[int] = None,
) -> Tuple[DdpgLearner, List[float]]:
    """
    Standard DDPG loop on one environment.

    Returns:
        The learner and the per-step total spectral efficiency of executed actions
    """
    steps = config.steps if steps is None else steps
    if steps < 1:
        raise ValidationError(f"DDPG needs at least one step, got {steps}")
    m, power = env.num_channels, env.total_power
    learner = DdpgLearner(env.spec, m, power, config, rng)
    buffer = ReplayBuffer(config.buffer_capacity, m, env.spec.intent_id, power)

    series: List[float] = []
    state = env.reset()
    for step in range(steps):
        u, _, _ = learner.scaled_action(learner.actor, learner.normalize_states(state.gains[None]))
        noisy = u[0] + exploration_std(step, steps, config) * rng.standard_normal(m)
        action = project_feasible(project_feasible(noisy, float(m)) * power / m, power)
        reward_vec, next_state = env.step(action)
        buffer.add(state.gains, action, reward_vec, next_state.gains)
        series.append(float(reward_vec.sum()))
        if len(buffer) >= config.batch_size:
            try:
                learner.update(buffer.sample(config.batch_size, rng))
            except DivergenceError as e:
                e.context["step"] = step
                raise
        state = next_state
        if (step + 1) % 500 == 0 or step == steps - 1:
            logger.info(
                f"DDPG step {step + 1}/{steps}: mean SE over last 50 steps {np.mean(series[-50:]):.3f}"
            )
    return learner, series


@dataclass
class EvalSummary:
    """Per-step total spectral efficiency of one scheme in one (intent, power) cell."""

    intent_id: int
    total_power: float
    seed: int
    per_step: List[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_step)) if self.per_step else 0.0

    @property
    def std(self) -> float:
        return float(np.std(self.per_step)) if self.per_step else 0.0


def evaluation_states(
    config: EnvSection, intent_id: int, total_power: float, episode: int, steps: int, seed: int
) -> List[np.ndarray]:
    """State sequence shared by every scheme for one evaluation episode."""
    rng = make_rng(seed, "evaluation", intent_id, repr(float(total_power)), episode)
    env = PowerAllocationEnv(config, intent_id, total_power, rng)
    return [state.gains for state in env.state_sequence(steps)]


def evaluate_policy(
    policy: Policy,
    config: EnvSection,
    intent_id: int,
    total_power: float,
    episodes: int,
    steps: int,
    seed: int,
) -> EvalSummary:
    """
    Roll a frozen policy over the paired evaluation states.

    Every emitted action is checked against the power constraints.
    """
    if episodes < 1:
        raise ValidationError(f"Evaluation needs at least one episode, got {episodes}")
    summary = EvalSummary(intent_id=intent_id, total_power=total_power, seed=seed)
    for episode in range(episodes):
        for gains in evaluation_states(config, intent_id, total_power, episode, steps, seed):
            action = policy(gains)
            check_feasible(action, total_power)
            summary.per_step.append(spectral_efficiency(gains, action, config.noise_power))
    return summary
