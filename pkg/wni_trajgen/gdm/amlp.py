"""
Attention-augmented MLP noise predictor.

    h0  = relu(W_in [x_t || time_embed(t) || cond_1 || ... || cond_k] + b_in)
    h1  = h0 + MHA(query=h0, keys/values=WNI rows)
    out = trunk(h1)        # hidden relu layers, then a linear head to M

The WNI feature enters only through the attention keys and values; earlier
trajectory elements enter only through the input concatenation.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..config import GdmSection
from ..errors import ConfigurationError
from ..nn import DenseLayer, Mlp, Module, MultiHeadAttention, time_embed_batch
from ..wni import WniFeature

logger = logging.getLogger(__name__)

WniInput = Union[WniFeature, np.ndarray]


class AmlpNet(Module):
    """Noise predictor for one trajectory element with ``arity`` conditioning elements."""

    def __init__(
        self,
        target_dim: int,
        arity: int,
        wni_width: int,
        config: GdmSection,
        rng: np.random.Generator,
    ):
        super().__init__()
        if arity < 0:
            raise ConfigurationError(f"Conditioning arity must be non-negative, got {arity}")
        self.target_dim = target_dim
        self.arity = arity
        self.wni_width = wni_width
        self.time_dim = config.time_dim
        hidden = config.hidden_dim

        in_features = target_dim * (1 + arity) + config.time_dim
        self.input_layer = self.register_module("input", DenseLayer(in_features, hidden, "relu", rng))
        self.attention = self.register_module(
            "attention",
            MultiHeadAttention(hidden, wni_width, config.heads, config.head_dim, out_dim=hidden, rng=rng),
        )
        widths = [hidden] * (config.layers - 1) + [target_dim]
        self.trunk = self.register_module("trunk", Mlp.build(widths, rng, "relu", "identity"))

    def _keyval(self, wni: WniInput, batch: int) -> np.ndarray:
        matrix = wni.matrix if isinstance(wni, WniFeature) else np.asarray(wni, dtype=np.float64)
        if matrix.ndim == 2:
            matrix = np.broadcast_to(matrix, (batch,) + matrix.shape)
        if matrix.ndim != 3 or matrix.shape[0] != batch:
            raise ConfigurationError(
                f"WNI input must be (rows, width) or ({batch}, rows, width), got {matrix.shape}"
            )
        return matrix

    def forward(
        self,
        x_t: np.ndarray,
        t: Union[int, np.ndarray],
        wni: WniInput,
        cond: Sequence[np.ndarray] = (),
    ) -> Tuple[np.ndarray, tuple]:
        """
        Args:
            x_t: (B, M) noisy target
            t: Scalar or (B,) diffusion steps
            wni: Feature shared by the batch, or a (B, rows, width) stack
            cond: ``arity`` arrays of shape (B, M)

        Returns:
            (B, M) predicted noise and the cache for ``backward``
        """
        if len(cond) != self.arity:
            raise ConfigurationError(
                f"Network expects {self.arity} conditioning elements, got {len(cond)}"
            )
        x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
        batch = x_t.shape[0]
        steps = np.broadcast_to(np.asarray(t), (batch,))
        parts = [x_t, time_embed_batch(steps, self.time_dim)]
        parts.extend(np.atleast_2d(np.asarray(c, dtype=np.float64)) for c in cond)
        inputs = np.concatenate(parts, axis=1)

        h0, input_cache = self.input_layer.forward(inputs)
        attended, attention_cache = self.attention.forward(h0[:, None, :], self._keyval(wni, batch))
        h1 = h0 + attended[:, 0, :]
        out, trunk_cache = self.trunk.forward(h1)
        return out, (input_cache, attention_cache, trunk_cache)

    def backward(self, cache: tuple, d_out: np.ndarray) -> None:
        """Accumulate parameter gradients for upstream gradient ``d_out``."""
        input_cache, attention_cache, trunk_cache = cache
        d_h1 = self.trunk.backward(trunk_cache, d_out)
        d_query, _ = self.attention.backward(attention_cache, d_h1[:, None, :])
        self.input_layer.backward(input_cache, d_h1 + d_query[:, 0, :])

    def __call__(self, x_t, t, wni: WniInput, cond: Sequence[np.ndarray] = ()) -> np.ndarray:
        return self.forward(x_t, t, wni, cond)[0]


def amlp_predict(
    net: AmlpNet,
    x_t: np.ndarray,
    t: Union[int, np.ndarray],
    wni: WniInput,
    cond: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Predicted noise, shaped like ``x_t`` (a single vector or a batch)."""
    cond = list(cond or [])
    if len(cond) != net.arity:
        raise ConfigurationError(f"Network expects {net.arity} conditioning elements, got {len(cond)}")
    squeeze = np.ndim(x_t) == 1
    out = net(x_t, t, wni, [np.atleast_2d(c) for c in cond])
    return out[0] if squeeze else out
