"""
Batch-constrained Q-learning over generated trajectories.

One iteration: VAE update on (s, a); next-state candidates decoded from the
VAE, perturbed by the target perturbation net and projected feasible; clipped
double-Q target y = r + gamma * max_k [lam * min(Q1', Q2') + (1 - lam) * max(Q1', Q2')];
critic regression; perturbation ascent on Q1 with the decoder frozen; Polyak
updates of the target critics and target perturbation net.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config import BcqSection
from ..dataset import TrajectoryDataset
from ..errors import ConfigurationError, DivergenceError
from ..nn import Adam, Module
from .feasibility import project_feasible
from .networks import LOG_STD_MAX, LOG_STD_MIN, PerturbNet, TwinQ, VaePolicy, gaussian_kl

logger = logging.getLogger(__name__)


@dataclass
class Normalization:
    """Affine state and scalar-reward normalization used inside a learner."""

    state_mean: float = 0.0
    state_std: float = 1.0
    reward_mean: float = 0.0
    reward_std: float = 1.0

    @classmethod
    def from_dataset(cls, dataset: TrajectoryDataset) -> "Normalization":
        rewards = dataset.r.sum(axis=1)
        state_std = float(dataset.s.std())
        reward_std = float(rewards.std())
        return cls(
            state_mean=float(dataset.s.mean()),
            state_std=state_std if state_std > 0 else 1.0,
            reward_mean=float(rewards.mean()),
            reward_std=reward_std if reward_std > 0 else 1.0,
        )

    def states(self, s: np.ndarray) -> np.ndarray:
        return (np.asarray(s, dtype=np.float64) - self.state_mean) / self.state_std

    def rewards(self, r: np.ndarray) -> np.ndarray:
        return (np.asarray(r, dtype=np.float64) - self.reward_mean) / self.reward_std

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class BcqDiagnostics:
    iteration: int
    q_loss: float
    recon_loss: float
    kl_loss: float
    perturb_objective: float

    def values(self) -> Dict[str, float]:
        return {
            "q_loss": self.q_loss,
            "recon_loss": self.recon_loss,
            "kl_loss": self.kl_loss,
            "perturb_objective": self.perturb_objective,
        }


class BcqLearner(Module):
    """VAE prior, perturbation net (online and target) and twin critics for one power budget."""

    def __init__(
        self,
        num_channels: int,
        total_power: float,
        config: BcqSection,
        rng: np.random.Generator,
        normalization: Optional[Normalization] = None,
    ):
        super().__init__()
        if not total_power > 0:
            raise ConfigurationError(f"Total power must be positive, got {total_power}")
        self.num_channels = num_channels
        self.total_power = float(total_power)
        self.config = config
        self.normalization = normalization or Normalization()
        m = num_channels
        self.vae = self.register_module("vae", VaePolicy(m, m, config.vae_hidden_dim, rng))
        self.perturb = self.register_module(
            "perturb", PerturbNet(m, m, config.hidden_dim, config.max_perturbation, rng)
        )
        self.perturb_target = self.register_module(
            "perturb_target", PerturbNet(m, m, config.hidden_dim, config.max_perturbation, rng)
        )
        self.perturb_target.copy_from(self.perturb)
        self.twin_q = self.register_module("twin_q", TwinQ(m, m, config.hidden_dim, rng))

        self.vae_optimizer = Adam(self.vae.parameters(), config.actor_lr)
        self.actor_optimizer = Adam(self.perturb.parameters(), config.actor_lr)
        self.critic_optimizer = Adam(self.twin_q.online_parameters(), config.critic_lr)
        self.iteration = 0
        self.history: List[Dict[str, float]] = []

    @property
    def action_scale(self) -> float:
        """Raw power per unit of scaled action, P / M."""
        return self.total_power / self.num_channels

    def to_scaled(self, actions: np.ndarray) -> np.ndarray:
        return np.asarray(actions, dtype=np.float64) / self.action_scale

    def to_raw(self, scaled: np.ndarray) -> np.ndarray:
        return project_feasible(np.asarray(scaled, dtype=np.float64) * self.action_scale, self.total_power)

    def prepare(self, batch: TrajectoryDataset) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Normalized states, feasible scaled actions, normalized scalar rewards, normalized next states."""
        norm = self.normalization
        actions = project_feasible(self.to_scaled(batch.a), float(self.num_channels))
        return norm.states(batch.s), actions, norm.rewards(batch.r.sum(axis=1)), norm.states(batch.s_next)


def vae_loss_and_grad(
    vae: VaePolicy,
    states: np.ndarray,
    actions: np.ndarray,
    noise: np.ndarray,
    kl_weight: float = 1.0,
    with_grad: bool = True,
) -> Tuple[float, float]:
    """
    Reconstruction MSE and mean KL for fixed reparameterization noise.

    With ``with_grad`` the gradient of recon + kl_weight * KL is accumulated
    into the VAE parameters.
    """
    batch = states.shape[0]
    if batch == 0:
        raise ConfigurationError("VAE batch is empty")
    mean, log_std, raw_log_std, enc_cache = vae.encode(states, actions)
    std = np.exp(log_std)
    decoded, dec_cache = vae.decode(states, mean + std * noise)

    residual = decoded - actions
    recon = float(np.mean(residual**2))
    kl = float(np.mean(gaussian_kl(mean, log_std)))
    if not (np.isfinite(recon) and np.isfinite(kl)):
        raise DivergenceError("Non-finite VAE loss", context={"recon": recon, "kl": kl})
    if not with_grad:
        return recon, kl

    d_dec_in = vae.decoder.backward(dec_cache, 2.0 * residual / residual.size)
    d_latent = d_dec_in[:, vae.state_dim :]
    d_mean = d_latent + kl_weight * mean / batch
    d_log_std = d_latent * noise * std + kl_weight * (std**2 - 1.0) / batch
    d_log_std *= (raw_log_std >= LOG_STD_MIN) & (raw_log_std <= LOG_STD_MAX)
    vae.encoder.backward(enc_cache, np.concatenate([d_mean, d_log_std], axis=1))
    return recon, kl


def vae_update(
    vae: VaePolicy,
    optimizer: Adam,
    states: np.ndarray,
    actions: np.ndarray,
    rng: np.random.Generator,
    kl_weight: float = 1.0,
) -> Tuple[float, float]:
    """
    One gradient step on reconstruction MSE + kl_weight * KL.

    Returns:
        (reconstruction loss, mean KL divergence)
    """
    noise = rng.standard_normal((states.shape[0], vae.latent_dim))
    recon, kl = vae_loss_and_grad(vae, states, actions, noise, kl_weight)
    optimizer.step()
    return recon, kl


def _scaled_candidates(
    learner: BcqLearner, states: np.ndarray, n: int, rng: np.random.Generator, perturb: PerturbNet
) -> np.ndarray:
    """(B, n, M) feasible scaled candidates for normalized states."""
    batch, dim = states.shape
    tiled = np.repeat(states, n, axis=0)
    latent = learner.vae.sample_latent(batch * n, rng)
    decoded = learner.vae.decoder(np.concatenate([tiled, latent], axis=1))
    perturbed = decoded + perturb(tiled, decoded)
    return project_feasible(perturbed, float(learner.num_channels)).reshape(batch, n, dim)


def candidate_actions(learner: BcqLearner, state: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Decode ``n`` latents per state, perturb and project.

    Returns:
        (n, M) raw feasible actions for one state, (B, n, M) for a batch
    """
    if n < 1:
        raise ConfigurationError(f"Candidate count must be >= 1, got {n}")
    single = np.ndim(state) == 1
    states = learner.normalization.states(np.atleast_2d(state))
    raw = learner.to_raw(_scaled_candidates(learner, states, n, rng, learner.perturb))
    return raw[0] if single else raw


def score_candidates(learner: BcqLearner, state: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Online Q1 value of each raw candidate action for one state."""
    states = learner.normalization.states(np.atleast_2d(state))
    return TwinQ.evaluate(learner.twin_q.q1, states, learner.to_scaled(candidates)[None])[0]


def policy_act(learner: BcqLearner, state: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """The candidate with the highest online Q1 value."""
    candidates = candidate_actions(learner, np.asarray(state, dtype=np.float64), n, rng)
    return candidates[int(np.argmax(score_candidates(learner, state, candidates)))]


def blended_target(
    rewards: np.ndarray, q1: np.ndarray, q2: np.ndarray, gamma: float, lam: float
) -> np.ndarray:
    """r + gamma * max over candidates of lam * min(q1, q2) + (1 - lam) * max(q1, q2)."""
    blend = lam * np.minimum(q1, q2) + (1.0 - lam) * np.maximum(q1, q2)
    return np.asarray(rewards, dtype=np.float64) + gamma * np.max(blend, axis=-1)


def bcq_target(
    twin_q: TwinQ,
    rewards: np.ndarray,
    next_candidates: np.ndarray,
    next_states: np.ndarray,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """Clipped double-Q target from the target critics; candidates are (B, n, M) scaled actions."""
    if next_candidates.shape[1] < 1:
        raise ConfigurationError("Need at least one next-state candidate")
    q1 = TwinQ.evaluate(twin_q.q1_target, next_states, next_candidates)
    q2 = TwinQ.evaluate(twin_q.q2_target, next_states, next_candidates)
    return blended_target(rewards, q1, q2, gamma, lam)


def bcq_train_iter(learner: BcqLearner, batch: TrajectoryDataset, rng: np.random.Generator) -> BcqDiagnostics:
    """One learner iteration over a raw mini-batch."""
    cfg = learner.config
    states, actions, rewards, next_states = learner.prepare(batch)
    size, dim = states.shape

    recon, kl = vae_update(learner.vae, learner.vae_optimizer, states, actions, rng, cfg.kl_weight)

    next_candidates = _scaled_candidates(learner, next_states, cfg.candidates, rng, learner.perturb_target)
    y = bcq_target(learner.twin_q, rewards, next_candidates, next_states, cfg.gamma, cfg.lam)

    q_loss = 0.0
    inputs = np.concatenate([states, actions], axis=1)
    for net in (learner.twin_q.q1, learner.twin_q.q2):
        q, cache = net.forward(inputs)
        residual = q[:, 0] - y
        q_loss += float(np.mean(residual**2))
        net.backward(cache, (2.0 * residual / size)[:, None])
    learner.critic_optimizer.step()

    latent = learner.vae.sample_latent(size, rng)
    decoded = learner.vae.decoder(np.concatenate([states, latent], axis=1))
    xi, perturb_cache = learner.perturb.forward(states, decoded)
    q1 = learner.twin_q.q1
    q_values, q_cache = q1.forward(np.concatenate([states, decoded + xi], axis=1))
    objective = float(np.mean(q_values))
    d_inputs = q1.backward(q_cache, np.full((size, 1), -1.0 / size))
    q1.zero_grad()
    learner.perturb.backward(perturb_cache, d_inputs[:, dim:])
    learner.actor_optimizer.step()

    learner.twin_q.soft_update(cfg.soft_update)
    learner.perturb_target.soft_update_from(learner.perturb, cfg.soft_update)

    diagnostics = BcqDiagnostics(learner.iteration, q_loss, recon, kl, objective)
    if not all(np.isfinite(v) for v in diagnostics.values().values()):
        raise DivergenceError(
            "Non-finite offline training diagnostics",
            stage="train-offline",
            context={"iteration": learner.iteration, **diagnostics.values()},
        )
    learner.iteration += 1
    learner.history.append(diagnostics.values())
    return diagnostics


def train_bcq(
    dataset: TrajectoryDataset,
    config: BcqSection,
    total_power: float,
    rng: np.random.Generator,
    iterations: Optional[int] = None,
) -> BcqLearner:
    """
    Train a learner on generated trajectories for one power budget.

    Raises:
        ConfigurationError: If the dataset holds fewer rows than one mini-batch
    """
    iterations = config.iterations if iterations is None else iterations
    if len(dataset) < config.batch_size:
        raise ConfigurationError(
            f"Offline training needs at least {config.batch_size} trajectories, got {len(dataset)}"
        )
    dataset = dataset.with_elements(a=project_feasible(dataset.a, total_power))
    learner = BcqLearner(
        dataset.num_channels, total_power, config, rng, normalization=Normalization.from_dataset(dataset)
    )
    for it in range(iterations):
        idx = rng.integers(0, len(dataset), size=config.batch_size)
        diagnostics = bcq_train_iter(learner, dataset.select(idx), rng)
        if (it + 1) % config.log_every == 0 or it == iterations - 1:
            window = learner.history[max(0, it + 1 - config.log_every) :]
            logger.info(
                f"Offline iteration {it + 1}/{iterations}: "
                f"q_loss={np.mean([h['q_loss'] for h in window]):.4f}, "
                f"recon={diagnostics.recon_loss:.4f}, kl={diagnostics.kl_loss:.4f}"
            )
    return learner


@dataclass
class BcqPolicy:
    """Frozen acting closure over a trained learner."""

    learner: BcqLearner
    candidates: int
    rng: np.random.Generator = field(repr=False)

    def __call__(self, state: np.ndarray) -> np.ndarray:
        return policy_act(self.learner, state, self.candidates, self.rng)
