"""
Projection onto the power-allocation feasible set {p >= 0, sum(p) <= P}.
"""

import numpy as np

from ..errors import DomainError

_MAX_TRIM_ATTEMPTS = 53


def project_feasible(action: np.ndarray, total_power: float) -> np.ndarray:
    """
    Clamp negatives to zero, then rescale by P / sum(p) when the budget is exceeded.

    Works on a single action or on any stack whose last axis is the channel axis.
    """
    if not total_power > 0:
        raise DomainError(f"Total power must be positive, got {total_power}")
    clamped = np.maximum(np.asarray(action, dtype=np.float64), 0.0)
    total = clamped.sum(axis=-1, keepdims=True)
    over = total > total_power
    projected = clamped * np.where(over, total_power / np.where(over, total, 1.0), 1.0)
    # The rounded sum can still land a few ulps over P; shrink those rows until it does not.
    rows = projected.reshape(-1, projected.shape[-1])
    eps = np.finfo(np.float64).eps
    for attempt in range(_MAX_TRIM_ATTEMPTS):
        still_over = rows.sum(axis=-1) > total_power
        if not still_over.any():
            break
        rows[still_over] *= 1.0 - eps * 2.0**attempt
    return projected


def rescale_backward(raw: np.ndarray, d_projected: np.ndarray, total_power: float) -> np.ndarray:
    """
    Gradient of the budget rescaling for non-negative rows.

    Rows within budget pass the gradient through; rows over budget use
    d x_j = (P / S) d a_j - (P / S^2) (d a . x).
    """
    raw = np.asarray(raw, dtype=np.float64)
    total = raw.sum(axis=-1, keepdims=True)
    over = total > total_power
    safe = np.where(over, total, 1.0)
    scaled = total_power / safe * d_projected - total_power / safe**2 * np.sum(
        d_projected * raw, axis=-1, keepdims=True
    )
    return np.where(over, scaled, d_projected)
