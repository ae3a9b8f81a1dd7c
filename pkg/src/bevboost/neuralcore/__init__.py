"""Minimal reverse-mode tensor layer set used by the generator and discriminators."""
from .adam import Adam, AdamState, adam_step
from .checkpoint import MAGIC, CheckpointError, load_checkpoint, save_checkpoint
from .nn import Conv2d, InstanceNorm, Linear, Module, checksum, grad_norm, parameter
from .tensor import NonFiniteError, Tensor, no_grad, set_debug

__all__ = [
    "Adam", "AdamState", "adam_step", "MAGIC", "CheckpointError", "load_checkpoint", "save_checkpoint",
    "Conv2d", "InstanceNorm", "Linear", "Module", "checksum", "grad_norm", "parameter",
    "NonFiniteError", "Tensor", "no_grad", "set_debug",
]
