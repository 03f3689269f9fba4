"""
Networks of the batch-constrained learner.

All networks see normalized states and actions in the scaled space
u = a * M / P, where the uniform allocation is the all-ones vector.
"""

import logging
from typing import Tuple

import numpy as np

from ..nn import Mlp, Module

logger = logging.getLogger(__name__)

LOG_STD_MIN = -4.0
LOG_STD_MAX = 4.0
LATENT_CLIP = 0.5


def gaussian_kl(mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Per-row KL(N(mean, std^2) || N(0, I)) = sum(mean^2 + std^2 - log std^2 - 1) / 2."""
    var = np.exp(2.0 * log_std)
    return 0.5 * np.sum(mean**2 + var - 2.0 * log_std - 1.0, axis=-1)


class VaePolicy(Module):
    """Conditional VAE modelling the behaviour action distribution."""

    def __init__(self, state_dim: int, action_dim: int, hidden_dim: int, rng: np.random.Generator):
        super().__init__()
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.latent_dim = 2 * action_dim
        self.encoder = self.register_module(
            "encoder", Mlp.build([state_dim + action_dim, hidden_dim, hidden_dim, 2 * self.latent_dim], rng)
        )
        self.decoder = self.register_module(
            "decoder", Mlp.build([state_dim + self.latent_dim, hidden_dim, hidden_dim, action_dim], rng)
        )

    def encode(self, states: np.ndarray, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, list]:
        """Returns (mean, clamped log-std, raw log-std, cache)."""
        out, cache = self.encoder.forward(np.concatenate([states, actions], axis=1))
        mean, raw_log_std = out[:, : self.latent_dim], out[:, self.latent_dim :]
        return mean, np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX), raw_log_std, cache

    def decode(self, states: np.ndarray, latent: np.ndarray) -> Tuple[np.ndarray, list]:
        return self.decoder.forward(np.concatenate([states, latent], axis=1))

    def sample_latent(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return np.clip(rng.standard_normal((count, self.latent_dim)), -LATENT_CLIP, LATENT_CLIP)


class PerturbNet(Module):
    """xi(s, u) = max_perturbation * tanh(f(s, u)), bounded elementwise."""

    def __init__(
        self, state_dim: int, action_dim: int, hidden_dim: int, max_perturbation: float, rng: np.random.Generator
    ):
        super().__init__()
        self.max_perturbation = max_perturbation
        self.body = self.register_module(
            "body",
            Mlp.build([state_dim + action_dim, hidden_dim, hidden_dim, action_dim], rng, "relu", "tanh"),
        )

    def forward(self, states: np.ndarray, actions: np.ndarray) -> Tuple[np.ndarray, list]:
        out, cache = self.body.forward(np.concatenate([states, actions], axis=1))
        return self.max_perturbation * out, cache

    def backward(self, cache: list, d_xi: np.ndarray) -> np.ndarray:
        return self.body.backward(cache, self.max_perturbation * d_xi)

    def __call__(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.forward(states, actions)[0]


class TwinQ(Module):
    """Two critics Q(s, u) -> scalar and their target copies."""

    def __init__(self, state_dim: int, action_dim: int, hidden_dim: int, rng: np.random.Generator):
        super().__init__()
        widths = [state_dim + action_dim, hidden_dim, hidden_dim, 1]
        self.q1 = self.register_module("q1", Mlp.build(widths, rng))
        self.q2 = self.register_module("q2", Mlp.build(widths, rng))
        self.q1_target = self.register_module("q1_target", Mlp.build(widths, rng))
        self.q2_target = self.register_module("q2_target", Mlp.build(widths, rng))
        self.q1_target.copy_from(self.q1)
        self.q2_target.copy_from(self.q2)

    def online_parameters(self):
        return self.q1.parameters() + self.q2.parameters()

    @staticmethod
    def evaluate(net: Mlp, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Q values for matching rows, or for every candidate when ``actions`` is (B, n, M)."""
        if actions.ndim == 3:
            batch, n, dim = actions.shape
            tiled = np.repeat(states, n, axis=0)
            return net(np.concatenate([tiled, actions.reshape(batch * n, dim)], axis=1)).reshape(batch, n)
        return net(np.concatenate([states, actions], axis=1))[:, 0]

    def soft_update(self, rate: float) -> None:
        self.q1_target.soft_update_from(self.q1, rate)
        self.q2_target.soft_update_from(self.q2, rate)
