"""
Training of the four chained noise predictors.

Each element model learns eps_theta(x_t, t, WNI, earlier elements) on
normalized expert trajectories, conditioning on the ground-truth earlier
elements of the same tuple.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import GdmSection
from ..dataset import TrajectoryDataset
from ..errors import DivergenceError, ValidationError
from ..models import ELEMENT_TYPES
from ..nn import Adam
from ..wni import WniEncoder
from .amlp import AmlpNet
from .schedule import NoiseSchedule, forward_diffuse

logger = logging.getLogger(__name__)


@dataclass
class GdmModelSet:
    """Noise predictors for s, a, r and s' with conditioning arities 0, 1, 2 and 3."""

    schedule: NoiseSchedule
    nets: Dict[str, AmlpNet]
    optimizers: Dict[str, Adam]
    num_channels: int
    wni_width: int
    step_count: int = 0
    loss_history: Dict[str, List[float]] = field(default_factory=lambda: {e: [] for e in ELEMENT_TYPES})

    @classmethod
    def build(
        cls, config: GdmSection, num_channels: int, rng: np.random.Generator, wni_width: Optional[int] = None
    ) -> "GdmModelSet":
        wni_width = wni_width if wni_width is not None else 2 * config.wni_dim
        nets = {
            element: AmlpNet(num_channels, arity, wni_width, config, rng)
            for arity, element in enumerate(ELEMENT_TYPES)
        }
        optimizers = {element: Adam(net.parameters(), config.learning_rate) for element, net in nets.items()}
        logger.info(
            f"Built generative model set: {sum(n.num_parameters() for n in nets.values())} parameters "
            f"over {len(nets)} element models"
        )
        return cls(
            schedule=NoiseSchedule.from_config(config),
            nets=nets,
            optimizers=optimizers,
            num_channels=num_channels,
            wni_width=wni_width,
        )

    def net(self, element: str) -> AmlpNet:
        return self.nets[element]


def gdm_train_step(
    models: GdmModelSet,
    batch: TrajectoryDataset,
    wni: np.ndarray,
    rng: np.random.Generator,
) -> Dict[str, float]:
    """
    One optimization step of every element model.

    Args:
        models: Model set, updated in place
        batch: Normalized trajectories
        wni: (B, rows, width) conditioning features, one per row of ``batch``
        rng: Source of diffusion steps and noise

    Returns:
        Mean squared noise-prediction error per element
    """
    size = len(batch)
    if size == 0:
        raise ValidationError("Training batch is empty")
    losses: Dict[str, float] = {}
    for element in ELEMENT_TYPES:
        net = models.nets[element]
        x0 = batch.element(element)
        t = rng.integers(1, models.schedule.timesteps + 1, size=size)
        eps = rng.standard_normal(x0.shape)
        x_t = forward_diffuse(x0, t, eps, models.schedule)
        cond = [batch.element(e) for e in ELEMENT_TYPES[: net.arity]]

        eps_hat, cache = net.forward(x_t, t, wni, cond)
        residual = eps_hat - eps
        loss = float(np.mean(residual**2))
        if not np.isfinite(loss):
            raise DivergenceError(
                f"Non-finite loss for element '{element}'",
                stage="train-gdm",
                context={"step": models.step_count, "element": element},
            )
        net.backward(cache, 2.0 * residual / residual.size)
        models.optimizers[element].step()
        losses[element] = loss
        models.loss_history[element].append(loss)
    models.step_count += 1
    return losses


def train_gdm(
    models: GdmModelSet,
    dataset: TrajectoryDataset,
    encoder: WniEncoder,
    config: GdmSection,
    rng: np.random.Generator,
    steps: Optional[int] = None,
) -> Dict[str, List[float]]:
    """
    Run ``steps`` mini-batch iterations over a normalized dataset.

    Returns:
        Per-element loss history of this run
    """
    steps = config.steps if steps is None else steps
    if len(dataset) == 0:
        raise ValidationError("Cannot train on an empty dataset")
    if np.any(np.isnan(dataset.power)):
        raise ValidationError("Training trajectories must record their total power")
    features = encoder.batch(dataset.intent, dataset.power)

    history: Dict[str, List[float]] = {e: [] for e in ELEMENT_TYPES}
    for step in range(steps):
        idx = rng.integers(0, len(dataset), size=config.batch_size)
        losses = gdm_train_step(models, dataset.select(idx), features[idx], rng)
        for element, value in losses.items():
            history[element].append(value)
        if (step + 1) % config.log_every == 0 or step == steps - 1:
            window = slice(max(0, step + 1 - config.log_every), step + 1)
            summary = ", ".join(f"{e}={np.mean(history[e][window]):.4f}" for e in ELEMENT_TYPES)
            logger.info(f"Generative training step {step + 1}/{steps}: {summary}")
        else:
            logger.debug(f"Generative training step {step + 1}: {losses}")
    return history
