"""
Online fine-tuning of an offline-trained learner.

Each environment step acts with the current policy, stores the real transition
and runs one learner iteration on a mini-batch mixing real and generated rows.
"""

import logging
from typing import List, Tuple

import numpy as np

from ..dataset import TrajectoryDataset
from ..env import PowerAllocationEnv
from .bcq import BcqLearner, bcq_train_iter, policy_act
from .buffer import ReplayBuffer

logger = logging.getLogger(__name__)


def fine_tune(
    learner: BcqLearner,
    env: PowerAllocationEnv,
    generated: TrajectoryDataset,
    steps: int,
    rng: np.random.Generator,
) -> Tuple[BcqLearner, List[float]]:
    """
    Returns:
        The updated learner and the per-step total spectral efficiency series
    """
    cfg = learner.config
    series: List[float] = []
    if steps <= 0:
        return learner, series

    buffer = ReplayBuffer(max(steps, 1), env.num_channels, env.spec.intent_id, env.total_power)
    state = env.reset()
    for step in range(steps):
        action = policy_act(learner, state.gains, cfg.candidates, rng)
        reward_vec, next_state = env.step(action)
        buffer.add(state.gains, action, reward_vec, next_state.gains)
        series.append(float(reward_vec.sum()))

        real_count = min(len(buffer), int(round(cfg.batch_size * cfg.finetune_real_fraction)))
        parts = [buffer.sample(real_count, rng)] if real_count else []
        if len(generated):
            synthetic_idx = rng.integers(0, len(generated), size=cfg.batch_size - real_count)
            parts.append(generated.select(synthetic_idx))
        bcq_train_iter(learner, TrajectoryDataset.concat(parts), rng)
        state = next_state
        logger.debug(f"Fine-tuning step {step + 1}/{steps}: SE {series[-1]:.3f}")
    logger.info(
        f"Fine-tuned for {steps} steps; mean SE over the last {min(50, steps)} steps "
        f"{np.mean(series[-50:]):.3f} bits/s/Hz"
    )
    return learner, series
