"""
Water-filling expert, expert trajectory collection and the background
knowledge base (BKB) of normalization statistics and per-intent bounds.
"""

import hashlib
import logging
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .config import EnvSection
from .dataset import TrajectoryDataset
from .env import per_channel_rates, sample_gain_matrix
from .errors import BkbLookupError, DegenerateDataError, DomainError
from .models import ELEMENT_TYPES, Bkb, IntentSpec

logger = logging.getLogger(__name__)

BISECTION_ITERATIONS = 100
# Width given to an (intent, element) bound whose samples are all identical.
DEGENERATE_BOUND_PAD = 1e-9


def _validate_waterfill_inputs(gains: np.ndarray, total_power: np.ndarray) -> None:
    if np.any(~np.isfinite(gains)) or np.any(gains <= 0):
        raise DomainError(
            "Water-filling needs strictly positive channel gains",
            context={"min_gain": float(np.nanmin(gains)) if gains.size else None},
        )
    if np.any(total_power <= 0):
        raise DomainError(
            "Total power must be positive", context={"min_power": float(np.min(total_power))}
        )


def waterfill_batch(
    gains: np.ndarray,
    total_power: Union[float, np.ndarray],
    n0: float = 1.0,
    iterations: int = BISECTION_ITERATIONS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Water-filling for a batch of channel-gain rows by bisection on the water level.

    p_m = max(0, mu - n0 / g_m) with mu in [min n0/g, max n0/g + P] chosen so
    that sum_m p_m = P.

    Args:
        gains: (N, M) channel gains
        total_power: Scalar or (N,) power budgets
        n0: Noise power
        iterations: Bisection iterations

    Returns:
        Tuple of ((N, M) powers, (N,) water levels)
    """
    gains = np.atleast_2d(np.asarray(gains, dtype=np.float64))
    budget = np.broadcast_to(np.asarray(total_power, dtype=np.float64), gains.shape[:1]).copy()
    _validate_waterfill_inputs(gains, budget)

    floor = n0 / gains
    lo = floor.min(axis=1)
    hi = floor.max(axis=1) + budget
    for _ in range(iterations):
        mu = 0.5 * (lo + hi)
        allocated = np.maximum(mu[:, None] - floor, 0.0).sum(axis=1)
        over = allocated > budget
        hi = np.where(over, mu, hi)
        lo = np.where(over, lo, mu)
    mu = 0.5 * (lo + hi)
    powers = np.maximum(mu[:, None] - floor, 0.0)
    return powers, mu


def waterfill(gains: Sequence[float], total_power: float, n0: float = 1.0) -> np.ndarray:
    """Optimal power allocation maximizing sum log2(1 + g p / n0) with sum p = P."""
    powers, _ = waterfill_batch(np.asarray(gains, dtype=np.float64)[None, :], total_power, n0)
    return powers[0]


def waterfill_closed_form(gains: Sequence[float], total_power: float, n0: float = 1.0) -> Tuple[np.ndarray, float]:
    """
    Water-filling by sorting: drop the weakest channel until every active
    channel receives non-negative power.

    Returns:
        Tuple of (powers, water level)
    """
    gains = np.asarray(gains, dtype=np.float64)
    _validate_waterfill_inputs(gains, np.asarray([total_power]))
    order = np.argsort(gains)[::-1]
    floor_sorted = n0 / gains[order]
    active = gains.size
    while active > 0:
        mu = (total_power + floor_sorted[:active].sum()) / active
        if mu > floor_sorted[active - 1]:
            break
        active -= 1
    powers = np.zeros_like(gains)
    powers[order[:active]] = mu - floor_sorted[:active]
    return powers, float(mu)


def collect_expert(
    specs: Iterable[IntentSpec],
    config: EnvSection,
    count_per_intent: int,
    rng: np.random.Generator,
) -> TrajectoryDataset:
    """
    Collect water-filling trajectories for every intent.

    For each trajectory: draw gains, draw a total power uniformly from the
    configured options, allocate by water-filling, record per-channel rates and
    redraw the next gains from the same intent.
    """
    if count_per_intent < 1:
        raise DomainError(f"count_per_intent must be >= 1, got {count_per_intent}")
    options = np.asarray(config.total_power_options, dtype=np.float64)
    parts = []
    for spec in specs:
        s = sample_gain_matrix(spec, count_per_intent, config.num_channels, rng)
        power = rng.choice(options, size=count_per_intent)
        a, _ = waterfill_batch(s, power, config.noise_power)
        r = per_channel_rates(s, a, config.noise_power)
        s_next = sample_gain_matrix(spec, count_per_intent, config.num_channels, rng)
        parts.append(
            TrajectoryDataset(
                intent=np.full(count_per_intent, spec.intent_id),
                s=s,
                a=a,
                r=r,
                s_next=s_next,
                power=power,
            )
        )
        logger.info(
            f"Collected {count_per_intent} expert trajectories for intent {spec.intent_id} "
            f"(mean SE {r.sum(axis=1).mean():.3f} bits/s/Hz)"
        )
    dataset = TrajectoryDataset.concat(parts)
    dataset.meta = {"kind": "expert", "count_per_intent": count_per_intent}
    return dataset


def dataset_fingerprint(dataset: TrajectoryDataset) -> str:
    """SHA-256 over the raw bytes of every column."""
    digest = hashlib.sha256()
    digest.update(dataset.intent.astype(np.int64).tobytes())
    for name in ELEMENT_TYPES:
        digest.update(np.ascontiguousarray(dataset.element(name)).tobytes())
    digest.update(dataset.power.tobytes())
    return digest.hexdigest()


def build_bkb(
    dataset: TrajectoryDataset, intent_ids: Optional[Iterable[int]] = None
) -> Tuple[TrajectoryDataset, Bkb]:
    """
    Z-score every element type globally and record per-intent bounds.

    Args:
        dataset: Raw expert trajectories
        intent_ids: Intents that must be represented (defaults to those present)

    Returns:
        Tuple of (normalized dataset, knowledge base)
    """
    if len(dataset) == 0:
        raise DegenerateDataError("Cannot build a knowledge base from an empty dataset")
    present = sorted(int(i) for i in np.unique(dataset.intent))
    required = sorted(intent_ids) if intent_ids is not None else present
    missing = [i for i in required if i not in present]
    if missing:
        raise DegenerateDataError("Intents missing from dataset", context={"missing": missing})

    mean: Dict[str, float] = {}
    std: Dict[str, float] = {}
    normalized: Dict[str, np.ndarray] = {}
    for name in ELEMENT_TYPES:
        values = dataset.element(name)
        mu = float(values.mean())
        sigma = float(values.std())
        if not sigma > 0:
            raise DegenerateDataError(f"Element '{name}' has zero variance")
        mean[name] = mu
        std[name] = sigma
        normalized[name] = (values - mu) / sigma

    bounds: Dict[str, Dict[str, Tuple[float, float]]] = {}
    for intent_id in required:
        mask = dataset.intent == intent_id
        per_element = {}
        for name in ELEMENT_TYPES:
            rows = normalized[name][mask]
            lo, hi = float(rows.min()), float(rows.max())
            if lo == hi:
                lo, hi = lo - DEGENERATE_BOUND_PAD, hi + DEGENERATE_BOUND_PAD
            per_element[name] = (lo, hi)
        bounds[Bkb.intent_key(intent_id)] = per_element

    counts = {Bkb.intent_key(i): int(np.sum(dataset.intent == i)) for i in required}
    bkb = Bkb(
        mean=mean,
        std=std,
        bounds=bounds,
        meta={
            "dataset_hash": dataset_fingerprint(dataset),
            "counts": counts,
            "num_channels": dataset.num_channels,
        },
    )
    logger.info(f"Built knowledge base over {len(dataset)} trajectories and {len(required)} intents")
    return dataset.with_elements(**normalized), bkb


def _moments(element: str, bkb: Bkb) -> Tuple[float, float]:
    if element not in bkb.mean or element not in bkb.std:
        raise BkbLookupError(f"Knowledge base has no statistics for element '{element}'")
    return bkb.mean[element], bkb.std[element]


def normalize(values: np.ndarray, element: str, bkb: Bkb) -> np.ndarray:
    mu, sigma = _moments(element, bkb)
    return (np.asarray(values, dtype=np.float64) - mu) / sigma


def denormalize(values: np.ndarray, element: str, bkb: Bkb) -> np.ndarray:
    """Restore raw units: x * std + mean."""
    mu, sigma = _moments(element, bkb)
    return np.asarray(values, dtype=np.float64) * sigma + mu


def normalize_dataset(dataset: TrajectoryDataset, bkb: Bkb) -> TrajectoryDataset:
    return dataset.with_elements(**{name: normalize(dataset.element(name), name, bkb) for name in ELEMENT_TYPES})


def normalized_bounds(bkb: Bkb, intent_id: int, element: str) -> Tuple[float, float]:
    key = Bkb.intent_key(intent_id)
    if key not in bkb.bounds:
        raise BkbLookupError(f"Knowledge base has no bounds for intent {intent_id}")
    if element not in bkb.bounds[key]:
        raise BkbLookupError(f"Knowledge base has no bounds for element '{element}' of intent {intent_id}")
    lo, hi = bkb.bounds[key][element]
    return float(lo), float(hi)


def raw_bounds(bkb: Bkb, intent_id: int, element: str) -> Tuple[float, float]:
    """Per-intent bounds mapped back to raw units."""
    lo, hi = normalized_bounds(bkb, intent_id, element)
    return float(denormalize(lo, element, bkb)), float(denormalize(hi, element, bkb))
