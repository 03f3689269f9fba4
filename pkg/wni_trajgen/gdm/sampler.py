"""
Knowledge-guided reverse sampling.

Elements are generated in the order s, a, r, s'; each reverse step is clipped
to the target intent's normalized bounds, and the denormalized result is
clipped again to the same bounds in raw units.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dataset import TrajectoryDataset
from ..errors import ConfigurationError, ValidationError
from ..expert import denormalize, normalized_bounds, raw_bounds
from ..models import ELEMENT_TYPES, Bkb
from .amlp import AmlpNet, WniInput
from .schedule import NoiseSchedule, posterior_mean
from .trainer import GdmModelSet

logger = logging.getLogger(__name__)

# Trajectories per RNG stream; fixed so output does not depend on the worker count.
GENERATION_CHUNK = 256


@dataclass
class GeneratedDataset:
    """Synthetic trajectories in raw units plus generation provenance."""

    trajectories: TrajectoryDataset
    target_intent: int
    total_power: Optional[float] = None
    clipped: bool = True
    meta: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.trajectories)


def reverse_step_clipped(
    net: AmlpNet,
    x_t: np.ndarray,
    t: int,
    wni: WniInput,
    cond: Sequence[np.ndarray],
    schedule: NoiseSchedule,
    bounds: Tuple[float, float],
    rng: np.random.Generator,
    clip: bool = True,
) -> np.ndarray:
    """
    x_{t-1} = clip(mean(x_t, eps_hat) + sigma_t z, alpha, beta) with z = 0 at t = 1.

    Raises:
        ConfigurationError: If the lower bound is not below the upper bound
    """
    lo, hi = bounds
    if not lo < hi:
        raise ConfigurationError(f"Clip bounds must satisfy alpha < beta, got ({lo}, {hi})")
    squeeze = np.ndim(x_t) == 1
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    eps_hat = net(x_t, t, wni, [np.atleast_2d(c) for c in cond])
    x_prev = posterior_mean(x_t, t, eps_hat, schedule)
    if t > 1:
        x_prev = x_prev + schedule.sigma[schedule.index(t)] * rng.standard_normal(x_prev.shape)
    if clip:
        x_prev = np.clip(x_prev, lo, hi)
    return x_prev[0] if squeeze else x_prev


def _generate_chunk(
    models: GdmModelSet,
    wni: WniInput,
    bounds: Dict[str, Tuple[float, float]],
    count: int,
    rng: np.random.Generator,
    clip: bool,
) -> Dict[str, np.ndarray]:
    # One standard-normal seed per element, drawn before any denoising.
    seeds = {element: rng.standard_normal((count, models.num_channels)) for element in ELEMENT_TYPES}
    generated: Dict[str, np.ndarray] = {}
    for element in ELEMENT_TYPES:
        net = models.nets[element]
        cond = [generated[e] for e in ELEMENT_TYPES[: net.arity]]
        x = seeds[element]
        for t in range(models.schedule.timesteps, 0, -1):
            x = reverse_step_clipped(net, x, t, wni, cond, models.schedule, bounds[element], rng, clip)
        generated[element] = x
    return generated


def generate_trajectories(
    models: GdmModelSet,
    target_wni: WniInput,
    target_intent_id: int,
    bkb: Bkb,
    count: int,
    rng: np.random.Generator,
    clip: bool = True,
    total_power: Optional[float] = None,
    threads: int = 1,
    seed: Optional[int] = None,
    model_hash: str = "",
) -> GeneratedDataset:
    """
    Generate ``count`` trajectories for the target intent.

    Args:
        models: Trained model set (read only)
        target_wni: Conditioning feature of the target scenario
        target_intent_id: Intent whose knowledge-base bounds constrain sampling
        bkb: Knowledge base with normalization statistics and bounds
        count: Number of trajectories L
        rng: Parent generator; one child stream is drawn per chunk
        clip: Disable for the clipping ablation
        total_power: Power budget recorded on every generated row
        threads: Worker cap for chunk generation
        seed: Run seed recorded in the metadata
        model_hash: Hash of the model manifest the samples came from

    Returns:
        Generated trajectories in raw units
    """
    if count < 0:
        raise ValidationError(f"Generation count must be non-negative, got {count}")
    bounds = {e: normalized_bounds(bkb, target_intent_id, e) for e in ELEMENT_TYPES}
    raw = {e: raw_bounds(bkb, target_intent_id, e) for e in ELEMENT_TYPES}

    sizes = [min(GENERATION_CHUNK, count - start) for start in range(0, count, GENERATION_CHUNK)]
    chunk_seeds = rng.integers(0, 2**63 - 1, size=len(sizes))
    jobs = [(size, np.random.default_rng(int(seed))) for size, seed in zip(sizes, chunk_seeds)]

    def run(job: Tuple[int, np.random.Generator]) -> Dict[str, np.ndarray]:
        return _generate_chunk(models, target_wni, bounds, job[0], job[1], clip)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks: List[Dict[str, np.ndarray]] = list(pool.map(run, jobs))
    else:
        chunks = [run(job) for job in jobs]

    elements: Dict[str, np.ndarray] = {}
    for element in ELEMENT_TYPES:
        if chunks:
            values = denormalize(np.concatenate([c[element] for c in chunks]), element, bkb)
        else:
            values = np.zeros((0, models.num_channels))
        if clip:
            values = np.clip(values, *raw[element])
        elements[element] = values

    meta = {
        "kind": "generated",
        "generated": True,
        "target_intent": int(target_intent_id),
        "total_power": total_power,
        "clipped": clip,
        "bkb_hash": bkb.meta.get("dataset_hash", ""),
        "seed": seed,
        "gdm_hash": model_hash,
    }
    dataset = TrajectoryDataset(
        intent=np.full(count, target_intent_id, dtype=np.int64),
        power=np.full(count, np.nan if total_power is None else total_power),
        meta=meta,
        **elements,
    )
    logger.info(
        f"Generated {count} trajectories for intent {target_intent_id}"
        + (f" at {total_power:g}W" if total_power is not None else "")
        + ("" if clip else " without clipping")
    )
    return GeneratedDataset(
        trajectories=dataset, target_intent=int(target_intent_id), total_power=total_power, clipped=clip, meta=meta
    )


def distribution_accuracy(generated: GeneratedDataset, bkb: Bkb) -> Dict[Tuple[int, str], float]:
    """
    Fraction of generated values inside their intent's raw-unit bounds.

    Returns:
        Mapping (intent id, element) -> fraction in [0, 1]
    """
    data = generated.trajectories
    if len(data) == 0:
        raise ValidationError("Distribution accuracy needs a non-empty dataset")
    result: Dict[Tuple[int, str], float] = {}
    for intent_id in sorted(int(i) for i in np.unique(data.intent)):
        rows = data.for_intent(intent_id)
        for element in ELEMENT_TYPES:
            lo, hi = raw_bounds(bkb, intent_id, element)
            values = rows.element(element)
            result[(intent_id, element)] = float(np.mean((values >= lo) & (values <= hi)))
    return result
