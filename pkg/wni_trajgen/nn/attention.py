"""
Multi-head cross-attention with an analytic backward pass.

Queries come from the network's hidden state, keys and values from the
conditioning token matrix:

    head_i = softmax((x W_Q,i^T)(c W_K,i^T)^T / sqrt(d)) (c W_V,i^T)
    out    = concat(head_1, ..., head_H) W_O^T
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ConfigurationError
from .layers import Module, glorot_uniform

logger = logging.getLogger(__name__)


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax."""
    shifted = scores - np.max(scores, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


class MultiHeadAttention(Module):
    """Cross-attention block; W_O has no bias."""

    def __init__(
        self,
        query_dim: int,
        key_dim: int,
        heads: int = 4,
        head_dim: int = 8,
        out_dim: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if heads < 1 or head_dim < 1:
            raise ConfigurationError(f"heads and head_dim must be positive, got {heads}, {head_dim}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.query_dim = query_dim
        self.key_dim = key_dim
        self.heads = heads
        self.head_dim = head_dim
        self.out_dim = out_dim if out_dim is not None else query_dim

        self.w_q = [
            self.register_parameter(f"w_q.{h}", glorot_uniform(query_dim, head_dim, rng))
            for h in range(heads)
        ]
        self.w_k = [
            self.register_parameter(f"w_k.{h}", glorot_uniform(key_dim, head_dim, rng))
            for h in range(heads)
        ]
        self.w_v = [
            self.register_parameter(f"w_v.{h}", glorot_uniform(key_dim, head_dim, rng))
            for h in range(heads)
        ]
        self.w_o = self.register_parameter(
            "w_o", glorot_uniform(heads * head_dim, self.out_dim, rng)
        )

    def _check_shapes(self, query: np.ndarray, keyval: np.ndarray) -> None:
        if query.ndim != 3 or keyval.ndim != 3:
            raise ConfigurationError(
                f"Attention expects (batch, rows, width) inputs, got {query.shape} and {keyval.shape}"
            )
        if query.shape[-1] != self.query_dim:
            raise ConfigurationError(
                "Query width does not match W_Q",
                context={"expected": self.query_dim, "got": query.shape[-1]},
            )
        if keyval.shape[-1] != self.key_dim:
            raise ConfigurationError(
                "Key/value width does not match W_K/W_V",
                context={"expected": self.key_dim, "got": keyval.shape[-1]},
            )
        if query.shape[0] != keyval.shape[0]:
            raise ConfigurationError(
                "Query and key/value batch sizes differ",
                context={"query_batch": query.shape[0], "keyval_batch": keyval.shape[0]},
            )

    def forward(self, query: np.ndarray, keyval: np.ndarray) -> Tuple[np.ndarray, tuple]:
        """
        Args:
            query: (batch, query_rows, query_dim)
            keyval: (batch, key_rows, key_dim)

        Returns:
            Output (batch, query_rows, out_dim) and the cache for ``backward``
        """
        self._check_shapes(query, keyval)
        scale = 1.0 / np.sqrt(self.head_dim)
        head_caches = []
        outputs: List[np.ndarray] = []
        for h in range(self.heads):
            q = query @ self.w_q[h].value.T
            k = keyval @ self.w_k[h].value.T
            v = keyval @ self.w_v[h].value.T
            weights = softmax(q @ np.swapaxes(k, -1, -2) * scale, axis=-1)
            outputs.append(weights @ v)
            head_caches.append((q, k, v, weights))
        concat = np.concatenate(outputs, axis=-1)
        out = concat @ self.w_o.value.T
        return out, (query, keyval, head_caches, concat)

    def backward(self, cache: tuple, d_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Accumulate parameter gradients; return (d_query, d_keyval)."""
        query, keyval, head_caches, concat = cache
        scale = 1.0 / np.sqrt(self.head_dim)
        self.w_o.grad += np.einsum("bqo,bqc->oc", d_out, concat)
        d_concat = d_out @ self.w_o.value

        d_query = np.zeros_like(query)
        d_keyval = np.zeros_like(keyval)
        for h, (q, k, v, weights) in enumerate(head_caches):
            d_head = d_concat[..., h * self.head_dim : (h + 1) * self.head_dim]
            d_weights = d_head @ np.swapaxes(v, -1, -2)
            d_v = np.swapaxes(weights, -1, -2) @ d_head
            # softmax Jacobian applied row-wise
            d_scores = weights * (d_weights - np.sum(d_weights * weights, axis=-1, keepdims=True))
            d_q = d_scores @ k * scale
            d_k = np.swapaxes(d_scores, -1, -2) @ q * scale

            self.w_q[h].grad += np.einsum("bqd,bqi->di", d_q, query)
            self.w_k[h].grad += np.einsum("bkd,bki->di", d_k, keyval)
            self.w_v[h].grad += np.einsum("bkd,bki->di", d_v, keyval)
            d_query += d_q @ self.w_q[h].value
            d_keyval += d_k @ self.w_k[h].value + d_v @ self.w_v[h].value
        return d_query, d_keyval


def mha_forward(query_seq: np.ndarray, keyval_seq: np.ndarray, layer: MultiHeadAttention) -> np.ndarray:
    """
    Attend a single query sequence over a single key/value sequence.

    Args:
        query_seq: (query_rows, query_dim)
        keyval_seq: (key_rows, key_dim)
        layer: Attention block

    Returns:
        (query_rows, out_dim) attended values
    """
    query_seq = np.asarray(query_seq, dtype=np.float64)
    keyval_seq = np.asarray(keyval_seq, dtype=np.float64)
    if query_seq.ndim != 2 or keyval_seq.ndim != 2:
        raise ConfigurationError(
            f"mha_forward expects 2-D sequences, got {query_seq.shape} and {keyval_seq.shape}"
        )
    out, _ = layer.forward(query_seq[None], keyval_seq[None])
    return out[0]
