"""Intent-conditioned diffusion model over trajectory elements."""

from .amlp import AmlpNet, amlp_predict
from .sampler import GeneratedDataset, distribution_accuracy, generate_trajectories, reverse_step_clipped
from .schedule import NoiseSchedule, forward_diffuse, posterior_mean, predict_x0
from .trainer import GdmModelSet, gdm_train_step, train_gdm

__all__ = [
    "AmlpNet",
    "GdmModelSet",
    "GeneratedDataset",
    "NoiseSchedule",
    "amlp_predict",
    "distribution_accuracy",
    "forward_diffuse",
    "gdm_train_step",
    "generate_trajectories",
    "posterior_mean",
    "predict_x0",
    "reverse_step_clipped",
    "train_gdm",
]
