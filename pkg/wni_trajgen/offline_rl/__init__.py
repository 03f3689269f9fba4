"""Batch-constrained offline learning on generated trajectories."""

from .bcq import (
    BcqDiagnostics,
    BcqLearner,
    BcqPolicy,
    Normalization,
    bcq_target,
    bcq_train_iter,
    blended_target,
    candidate_actions,
    policy_act,
    score_candidates,
    train_bcq,
    vae_loss_and_grad,
    vae_update,
)
from .buffer import ReplayBuffer
from .feasibility import project_feasible, rescale_backward
from .finetune import fine_tune
from .networks import PerturbNet, TwinQ, VaePolicy, gaussian_kl

__all__ = [
    "BcqDiagnostics",
    "BcqLearner",
    "BcqPolicy",
    "Normalization",
    "PerturbNet",
    "ReplayBuffer",
    "TwinQ",
    "VaePolicy",
    "bcq_target",
    "bcq_train_iter",
    "blended_target",
    "candidate_actions",
    "fine_tune",
    "gaussian_kl",
    "policy_act",
    "project_feasible",
    "rescale_backward",
    "score_candidates",
    "train_bcq",
    "vae_loss_and_grad",
    "vae_update",
]
