"""
Sinusoidal diffusion-step embedding.
"""

import numpy as np

from ..errors import ConfigurationError


def _frequencies(dim: int) -> np.ndarray:
    if dim < 2 or dim % 2:
        raise ConfigurationError(f"Time embedding dimension must be even and >= 2, got {dim}")
    half = dim // 2
    return 1.0 / (10000.0 ** (np.arange(half) / half))


def time_embed_batch(t: np.ndarray, dim: int) -> np.ndarray:
    """Embed a vector of step indices into (len(t), dim) interleaved sin/cos rows."""
    freqs = _frequencies(dim)
    angles = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs
    out = np.empty((angles.shape[0], dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


def time_embed(t: int, dim: int) -> np.ndarray:
    """
    Transformer-style embedding of one diffusion step.

    Entries alternate sin/cos over geometrically spaced frequencies, so
    ``time_embed(0, 4) == [0, 1, 0, 1]``.
    """
    if t < 0:
        raise ConfigurationError(f"Diffusion step must be non-negative, got {t}")
    return time_embed_batch(np.array([t]), dim)[0]
