"""Minimal reverse-mode autodiff and the layer kinds the transceiver needs."""

from . import functional
from .checkpoint import QuantizedArray, load_checkpoint, save_checkpoint
from .functional import ce_loss, dense, embedding, fake_quantize, layer_norm, multi_head_attention, softmax
from .graph import LayerSpec, forward, init_params, transformer_block, validate_specs
from .optim import Adam, clip_grad_norm
from .params import ParamSet, glorot_uniform
from .tensor import (
    DimensionError,
    StateError,
    Tensor,
    backward,
    get_default_dtype,
    no_grad,
    precision,
    relu,
    set_default_dtype,
    sigmoid,
    ste_round,
)

__all__ = [
    "Adam",
    "DimensionError",
    "LayerSpec",
    "ParamSet",
    "QuantizedArray",
    "StateError",
    "Tensor",
    "backward",
    "ce_loss",
    "clip_grad_norm",
    "dense",
    "embedding",
    "fake_quantize",
    "forward",
    "functional",
    "get_default_dtype",
    "glorot_uniform",
    "init_params",
    "layer_norm",
    "load_checkpoint",
    "multi_head_attention",
    "no_grad",
    "precision",
    "relu",
    "save_checkpoint",
    "set_default_dtype",
    "sigmoid",
    "softmax",
    "ste_round",
    "transformer_block",
    "validate_specs",
]
