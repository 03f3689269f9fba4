"""Differentiable building blocks with hand-written backward passes."""

from .attention import MultiHeadAttention, mha_forward, softmax
from .checkpoint import load_checkpoint, load_into, save_checkpoint
from .embedding import time_embed, time_embed_batch
from .gradcheck import grad_check
from .layers import DenseLayer, Mlp, Module, Parameter, mlp_forward_backward
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Adam",
    "AdamState",
    "DenseLayer",
    "Mlp",
    "Module",
    "MultiHeadAttention",
    "Parameter",
    "adam_step",
    "grad_check",
    "load_checkpoint",
    "load_into",
    "mha_forward",
    "mlp_forward_backward",
    "save_checkpoint",
    "softmax",
    "time_embed",
    "time_embed_batch",
]
