"""Minimal float64 autodiff, layers and the AdamW optimizer."""
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import finite_diff_check
from .nn import MLP, BiLSTM, LayerNorm, Linear, Module, Parameter
from .optim import AdamW, adamw_step, clip_grad_norm
from .tensor import Tensor, no_grad
from . import tensor as ops

__all__ = [
    "AdamW", "BiLSTM", "LayerNorm", "Linear", "MLP", "Module", "Parameter", "Tensor",
    "adamw_step", "clip_grad_norm", "finite_diff_check", "load_checkpoint", "ops",
    "no_grad", "save_checkpoint",
]
