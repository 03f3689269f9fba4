"""
Central finite-difference gradient checking.
"""

import logging
from typing import Callable, Dict, Optional

import numpy as np

from ..models import GradCheckReport
from .layers import Parameter

logger = logging.getLogger(__name__)

# Objective contract: objective(True) zeroes grads, runs forward + backward and
# returns the loss; objective(False) only returns the loss.
Objective = Callable[[bool], float]

MAX_CHECKED_PARAMETERS = 10_000


def grad_check(
    params: Dict[str, Parameter],
    objective: Objective,
    tolerance: float = 1e-4,
    h: float = 1e-5,
    denominator_floor: float = 1e-6,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """
    Compare analytic gradients against central differences.

    Relative error per entry is |a - n| / max(|a| + |n|, denominator_floor).

    Args:
        params: Named parameters to perturb
        objective: Loss callable, see ``Objective``
        tolerance: Pass threshold on the maximum relative error
        h: Finite-difference step
        denominator_floor: Guards entries whose gradient is ~0
        max_entries: Check a random subset of entries per parameter when set
        rng: Generator for the subset selection

    Returns:
        Report with the worst relative error and the parameter that produced it
    """
    total = sum(p.value.size for p in params.values())
    if total > MAX_CHECKED_PARAMETERS:
        logger.warning(
            f"Gradient check over {total} parameters exceeds the desk-scale limit "
            f"{MAX_CHECKED_PARAMETERS}; expect a slow check"
        )

    for param in params.values():
        param.zero_grad()
    objective(True)
    analytic = {name: p.grad.copy() for name, p in params.items()}

    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    worst_name = None
    checked = 0
    for name, param in params.items():
        flat = param.value.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = rng.choice(flat.size, size=max_entries, replace=False)
        grad_flat = analytic[name].reshape(-1)
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + h
            loss_plus = objective(False)
            flat[idx] = original - h
            loss_minus = objective(False)
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            a = grad_flat[idx]
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), denominator_floor)
            checked += 1
            if rel > worst:
                worst = rel
                worst_name = f"{name}[{int(idx)}]"

    passed = worst < tolerance
    logger.debug(f"Gradient check over {checked} entries: max relative error {worst:.3e}")
    return GradCheckReport(
        max_relative_error=float(worst),
        worst_parameter=worst_name,
        checked=checked,
        tolerance=tolerance,
        passed=passed,
    )
