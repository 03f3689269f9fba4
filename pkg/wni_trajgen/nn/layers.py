"""
Dense layers, multi-layer perceptrons and the parameter container they share.

Forward passes return ``(output, cache)`` and never mutate the layer, so frozen
networks can be evaluated from several threads. Backward passes accumulate into
``Parameter.grad`` and are owned by a single trainer.
"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "identity")


class Parameter:
    """A trainable array and its accumulated gradient."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


class Module:
    """Minimal container with named, ordered parameters and sub-modules."""

    def __init__(self) -> None:
        self._params: Dict[str, Parameter] = {}
        self._children: Dict[str, "Module"] = {}

    def register_parameter(self, name: str, value: np.ndarray) -> Parameter:
        param = Parameter(value)
        self._params[name] = param
        return param

    def register_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Dict[str, Parameter]:
        named: Dict[str, Parameter] = {}
        for name, param in self._params.items():
            named[f"{prefix}{name}"] = param
        for name, child in self._children.items():
            named.update(child.named_parameters(prefix=f"{prefix}{name}."))
        return named

    def parameters(self) -> List[Parameter]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters()))

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copy values in, checking names and sizes."""
        named = self.named_parameters()
        missing = sorted(set(named) - set(state))
        if missing:
            raise ConfigurationError(f"State is missing parameters: {missing[:5]}")
        for name, param in named.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.size != param.value.size:
                raise ConfigurationError(
                    f"Parameter '{name}' has {param.value.size} entries, state has {value.size}"
                )
            param.value[...] = value.reshape(param.shape)

    def copy_from(self, other: "Module") -> None:
        self.load_state_dict(other.state_dict())

    def soft_update_from(self, source: "Module", rate: float) -> None:
        """Polyak averaging: theta' <- rate * theta + (1 - rate) * theta'."""
        if not 0.0 <= rate <= 1.0:
            raise ConfigurationError(f"Soft update rate must lie in [0, 1], got {rate}")
        source_params = source.named_parameters()
        for name, param in self.named_parameters().items():
            param.value[...] = rate * source_params[name].value + (1.0 - rate) * param.value


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)), shaped (fan_out, fan_in)."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(y: np.ndarray, dy: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return dy * (y > 0.0)
    if activation == "tanh":
        return dy * (1.0 - y * y)
    return dy


class DenseLayer(Module):
    """Affine map followed by an element-wise activation."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        activation: str = "relu",
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"Unknown activation '{activation}'. Supported: {', '.join(ACTIVATIONS)}"
            )
        if in_features < 1 or out_features < 1:
            raise ConfigurationError(
                f"Layer widths must be positive, got {in_features}->{out_features}"
            )
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        self.weight = self.register_parameter("weight", glorot_uniform(in_features, out_features, rng))
        self.bias = self.register_parameter("bias", np.zeros(out_features))

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
        if x.shape[-1] != self.in_features:
            raise ConfigurationError(
                f"Dense layer expects input width {self.in_features}, got {x.shape[-1]}"
            )
        z = x @ self.weight.value.T + self.bias.value
        y = _activate(z, self.activation)
        return y, (x, y)

    def backward(self, cache: Tuple[np.ndarray, np.ndarray], dy: np.ndarray) -> np.ndarray:
        x, y = cache
        dz = _activation_grad(y, dy, self.activation)
        self.weight.grad += dz.T @ x
        self.bias.grad += dz.sum(axis=0)
        return dz @ self.weight.value


class Mlp(Module):
    """Chain of dense layers."""

    def __init__(self, layers: Sequence[DenseLayer]):
        super().__init__()
        if not layers:
            raise ConfigurationError("An MLP needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_features != nxt.in_features:
                raise ConfigurationError(
                    f"Layer widths do not chain: {prev.out_features} -> {nxt.in_features}"
                )
        self.layers = list(layers)
        for i, layer in enumerate(self.layers):
            self.register_module(f"layer{i}", layer)

    @classmethod
    def build(
        cls,
        widths: Sequence[int],
        rng: np.random.Generator,
        hidden_activation: str = "relu",
        output_activation: str = "identity",
    ) -> "Mlp":
        """Build from a width list ``[in, h1, ..., out]``."""
        if len(widths) < 2:
            raise ConfigurationError(f"Need at least input and output widths, got {list(widths)}")
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            last = i == len(widths) - 2
            layers.append(
                DenseLayer(fan_in, fan_out, output_activation if last else hidden_activation, rng)
            )
        return cls(layers)

    @property
    def in_features(self) -> int:
        return self.layers[0].in_features

    @property
    def out_features(self) -> int:
        return self.layers[-1].out_features

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, List[tuple]]:
        caches = []
        for i, layer in enumerate(self.layers):
            x, cache = layer.forward(x)
            if not np.all(np.isfinite(x)):
                raise NumericalError(
                    "Non-finite activation", context={"layer_index": i, "activation": layer.activation}
                )
            caches.append(cache)
        return x, caches

    def backward(self, caches: List[tuple], dy: np.ndarray) -> np.ndarray:
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy = layer.backward(cache, dy)
        return dy

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]


def mlp_forward_backward(
    net: Mlp, inputs: np.ndarray, upstream_grad: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Run one forward and backward pass, accumulating layer gradients.

    Args:
        net: Network to evaluate
        inputs: Input vector (or batch of row vectors)
        upstream_grad: Gradient of the loss with respect to the output

    Returns:
        Tuple of (output, gradient with respect to the input), shaped like the arguments
    """
    squeeze = np.ndim(inputs) == 1
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    dy = np.atleast_2d(np.asarray(upstream_grad, dtype=np.float64))
    output, caches = net.forward(x)
    if dy.shape != output.shape:
        raise ConfigurationError(
            f"Upstream gradient shape {dy.shape} does not match output shape {output.shape}"
        )
    input_grad = net.backward(caches, dy)
    if squeeze:
        return output[0], input_grad[0]
    return output, input_grad


def iter_parameters(modules: Iterable[Module]) -> List[Parameter]:
    """Flatten parameters of several modules into one list."""
    params: List[Parameter] = []
    for module in modules:
        params.extend(module.parameters())
    return params
