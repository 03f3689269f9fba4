"""
Adam optimizer over ``Parameter`` lists.
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..errors import ConfigurationError
from .layers import Parameter


@dataclass
class AdamState:
    """Moment accumulators and hyper-parameters of one Adam instance."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: List[np.ndarray] = field(default_factory=list)
    second_moment: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_parameters(cls, params: Sequence[Parameter], learning_rate: float, **kwargs) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            first_moment=[np.zeros_like(p.value) for p in params],
            second_moment=[np.zeros_like(p.value) for p in params],
            **kwargs,
        )


def adam_step(params: Sequence[Parameter], state: AdamState) -> None:
    """
    Apply one bias-corrected Adam update in place and zero the gradients.

    Raises:
        ConfigurationError: If accumulator and parameter shapes disagree
    """
    if len(params) != len(state.first_moment):
        raise ConfigurationError(
            f"Optimizer tracks {len(state.first_moment)} tensors, got {len(params)} parameters"
        )
    for i, (param, m) in enumerate(zip(params, state.first_moment)):
        if m.shape != param.value.shape or param.grad.shape != param.value.shape:
            raise ConfigurationError(
                "Optimizer state shape mismatch",
                context={"index": i, "state": m.shape, "param": param.value.shape, "grad": param.grad.shape},
            )

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for param, m, v in zip(params, state.first_moment, state.second_moment):
        g = param.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        param.value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        param.zero_grad()


class Adam:
    """Convenience wrapper binding a parameter list to its AdamState."""

    def __init__(self, params: Sequence[Parameter], learning_rate: float, **kwargs):
        self.params = list(params)
        self.state = AdamState.for_parameters(self.params, learning_rate, **kwargs)

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()
