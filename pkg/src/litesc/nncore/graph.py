"""Sequential layer stacks described by :class:`LayerSpec` lists."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .params import ParamSet, glorot_uniform
from .tensor import DimensionError, Tensor, relu, sigmoid

LAYER_KINDS = (
    "embedding",
    "dense",
    "relu",
    "sigmoid",
    "softmax",
    "layer_norm",
    "multi_head_attention",
    "transformer_block",
    "prediction",
)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str = ""
    units: int | None = None
    heads: int | None = None
    ff_units: int | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")


def _out_dim(spec: LayerSpec, in_dim: int | None) -> int | None:
    if spec.kind in ("embedding", "dense", "prediction"):
        return spec.units
    if spec.kind in ("multi_head_attention", "transformer_block") and spec.units is not None:
        if in_dim is not None and spec.units != in_dim:
            raise DimensionError(f"layer {spec.name or spec.kind}: units {spec.units} != input dim {in_dim}")
    return in_dim


def validate_specs(specs: list[LayerSpec], input_dim: int | None) -> list[int | None]:
    """Check that layer sizes compose; return the output dim after each layer."""
    dims = []
    d = input_dim
    for i, spec in enumerate(specs):
        if spec.kind == "embedding" and i != 0:
            raise DimensionError(f"layer {spec.name}: embedding must be the first layer")
        if spec.kind in ("multi_head_attention", "transformer_block"):
            heads = spec.heads or 1
            if d is None or d % heads:
                raise DimensionError(f"layer {spec.name}: dim {d} not divisible by {heads} heads")
        d = _out_dim(spec, d)
        dims.append(d)
    return dims


def _attn_params(params: ParamSet, prefix: str) -> dict:
    return {k: params.pair(f"{prefix}.{k}") for k in ("q", "k", "v", "o")}


def init_params(
    specs: list[LayerSpec],
    input_dim: int,
    rng: np.random.Generator,
    partition: str,
    params: ParamSet | None = None,
    dtype=None,
) -> ParamSet:
    """Create Glorot-initialised parameters for every layer in ``specs``."""
    params = params if params is not None else ParamSet()
    validate_specs(specs, input_dim)

    def add_dense(prefix, n_in, n_out):
        params.add(f"{prefix}.W", glorot_uniform(rng, (n_in, n_out), dtype), partition, dtype)
        params.add(f"{prefix}.b", np.zeros(n_out), partition, dtype)

    def add_norm(prefix, n):
        params.add(f"{prefix}.g", np.ones(n), partition, dtype)
        params.add(f"{prefix}.b", np.zeros(n), partition, dtype)

    d = input_dim
    for spec in specs:
        name = spec.name
        if spec.kind == "embedding":
            params.add(f"{name}.E", glorot_uniform(rng, (d, spec.units), dtype), partition, dtype)
        elif spec.kind in ("dense", "prediction"):
            add_dense(name, d, spec.units)
        elif spec.kind == "layer_norm":
            add_norm(name, d)
        elif spec.kind == "multi_head_attention":
            for k in ("q", "k", "v", "o"):
                add_dense(f"{name}.{k}", d, d)
        elif spec.kind == "transformer_block":
            ff = spec.ff_units or 4 * d
            for k in ("q", "k", "v", "o"):
                add_dense(f"{name}.attn.{k}", d, d)
            add_norm(f"{name}.ln1", d)
            add_dense(f"{name}.ff1", d, ff)
            add_dense(f"{name}.ff2", ff, d)
            add_norm(f"{name}.ln2", d)
        d = _out_dim(spec, d)
    return params


def transformer_block(x: Tensor, params: ParamSet, prefix: str, heads: int, key_mask=None) -> Tensor:
    """Post-norm block: self-attention and a ReLU feed-forward, each with a residual."""
    a = F.multi_head_attention(x, _attn_params(params, f"{prefix}.attn"), heads, key_mask)
    h = F.layer_norm(x + a, params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"])
    f = F.dense(relu(F.dense(h, *params.pair(f"{prefix}.ff1"))), *params.pair(f"{prefix}.ff2"))
    return F.layer_norm(h + f, params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"])


def forward(params: ParamSet, specs: list[LayerSpec], x, key_mask: np.ndarray | None = None) -> Tensor:
    """Run a sequential stack.

    ``x`` is an integer id array when the first layer is an embedding and a
    :class:`Tensor` otherwise.
    """
    out = x
    for i, spec in enumerate(specs):
        label = spec.name or f"{spec.kind}[{i}]"
        try:
            out = _apply(params, spec, out, key_mask)
        except DimensionError as exc:
            raise DimensionError(f"layer {label}: {exc}") from None
        except KeyError as exc:
            raise KeyError(f"layer {label}: {exc.args[0]}") from None
    return out


def _apply(params: ParamSet, spec: LayerSpec, x, key_mask):
    kind = spec.kind
    if kind == "embedding":
        return F.embedding(params[f"{spec.name}.E"], x)
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if kind == "dense":
        return F.dense(x, *params.pair(spec.name))
    if kind == "prediction":
        return F.softmax(F.dense(x, *params.pair(spec.name)))
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "softmax":
        return F.softmax(x)
    if kind == "layer_norm":
        if f"{spec.name}.g" in params:
            return F.layer_norm(x, params[f"{spec.name}.g"], params[f"{spec.name}.b"])
        return F.layer_norm(x)
    if kind == "multi_head_attention":
        return F.multi_head_attention(x, _attn_params(params, spec.name), spec.heads or 1, key_mask)
    if kind == "transformer_block":
        return transformer_block(x, params, spec.name, spec.heads or 1, key_mask)
    raise ValueError(kind)
