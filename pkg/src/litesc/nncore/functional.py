"""Fused layer primitives with hand-written backward passes."""

from __future__ import annotations

import numpy as np

from .tensor import DimensionError, Tensor, _as_tensor, _make, _unbroadcast, matmul, reshape, transpose

PROB_EPS = 1e-12


def dense(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ W + b`` over the last axis of ``x``."""
    if x.shape[-1] != W.shape[0]:
        raise DimensionError(f"dense expects last dim {W.shape[0]}, got {x.shape[-1]}")
    xd = x.data
    out = xd @ W.data
    if b is not None:
        out = out + b.data

    def _bw(g):
        if W.requires_grad:
            W._accumulate(xd.reshape(-1, xd.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
        if b is not None and b.requires_grad:
            b._accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))
        if x.requires_grad:
            x._accumulate(g @ W.data.T)

    parents = (x, W) if b is None else (x, W, b)
    return _make(out, parents, _bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _bw(g):
        x._accumulate(out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _make(out, (x,), _bw)


def layer_norm(x: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None, eps: float = 1e-6) -> Tensor:
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat
    if gamma is not None:
        out = out * gamma.data
    if beta is not None:
        out = out + beta.data
    n = x.shape[-1]

    def _bw(g):
        if beta is not None and beta.requires_grad:
            beta._accumulate(g.reshape(-1, n).sum(axis=0))
        if gamma is not None and gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, n).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data if gamma is not None else g
            gx_mean = gx.mean(axis=-1, keepdims=True)
            proj = (gx * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gx - gx_mean - xhat * proj))

    parents = tuple(t for t in (x, gamma, beta) if t is not None)
    return _make(out.astype(x.dtype, copy=False), parents, _bw)


def embedding(W: Tensor, ids) -> Tensor:
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= W.shape[0]):
        raise DimensionError(f"embedding index out of range [0, {W.shape[0]})")

    def _bw(g):
        full = np.zeros_like(W.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, W.shape[1]))
        W._accumulate(full)

    return _make(W.data[ids], (W,), _bw)


def multi_head_attention(
    x: Tensor,
    params: dict,
    heads: int,
    key_mask: np.ndarray | None = None,
) -> Tensor:
    """Scaled dot-product self-attention.

    ``params`` holds ``q``, ``k``, ``v``, ``o`` entries, each a ``(W, b)`` pair.
    ``key_mask`` is a boolean ``(batch, length)`` array, True on real tokens.
    """
    B, L, D = x.shape
    if D % heads:
        raise DimensionError(f"model dim {D} not divisible by {heads} heads")
    dh = D // heads

    def split(t):
        return transpose(reshape(t, (B, L, heads, dh)), (0, 2, 1, 3))

    q = split(dense(x, *params["q"]))
    k = split(dense(x, *params["k"]))
    v = split(dense(x, *params["v"]))
    scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
    if key_mask is not None:
        bias = np.where(key_mask, 0.0, -1e9).astype(x.dtype)[:, None, None, :]
        scores = scores + Tensor(bias, dtype=x.dtype)
    attn = softmax(scores, axis=-1)
    ctx = reshape(transpose(matmul(attn, v), (0, 2, 1, 3)), (B, L, D))
    return dense(ctx, *params["o"])


def ce_loss(pred: Tensor, target, mask: np.ndarray | None = None, eps: float = PROB_EPS) -> Tensor:
    """Two-term cross entropy over the whole vocabulary, averaged over tokens.

    For each position the one-hot target ``q`` and predicted distribution ``p``
    contribute ``-sum q log p + sum (q - 1) log(1 - p)``. Probabilities are
    clamped to ``[eps, 1 - eps]`` inside the logs. ``mask`` (True = counted)
    excludes padding.
    """
    p = pred.data
    target = np.asarray(target)
    V = p.shape[-1]
    if target.shape != p.shape[:-1]:
        raise DimensionError(f"target shape {target.shape} does not match predictions {p.shape[:-1]}")
    if target.size and (target.min() < 0 or target.max() >= V):
        raise DimensionError(f"target index out of range [0, {V})")
    if mask is None:
        mask = np.ones(target.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    count = max(int(mask.sum()), 1)
    q = np.zeros_like(p)
    np.put_along_axis(q, target[..., None], 1.0, axis=-1)
    p_lo = np.maximum(p, eps)
    p_hi = np.maximum(1.0 - p, eps)
    per_token = -(q * np.log(p_lo)).sum(-1) + ((q - 1.0) * np.log(p_hi)).sum(-1)
    value = np.asarray((per_token * mask).sum() / count, dtype=p.dtype)

    def _bw(g):
        # d/dp of each term; clamped regions contribute no gradient
        dp = -q / p_lo * (p >= eps) + (1.0 - q) / p_hi * ((1.0 - p) >= eps)
        pred._accumulate(g * dp * mask[..., None] / count)

    return _make(value, (pred,), _bw)


def mse_loss(pred: Tensor, target) -> Tensor:
    diff = pred - _as_tensor(target, pred.dtype)
    return (diff * diff).mean()


def frobenius_loss(pred: Tensor, target) -> Tensor:
    """Half squared Frobenius norm per sample, averaged over the leading axis."""
    diff = pred - _as_tensor(target, pred.dtype)
    n = pred.shape[0] if pred.ndim > 1 else 1
    return (diff * diff).sum() * (0.5 / n)


def fake_quantize(x: Tensor, x_min: float, scale: float, levels: int) -> Tensor:
    """Quantise to integer codes in ``[0, levels]`` and map back to floats.

    Rounding is ties-to-even. The backward pass is straight-through inside the
    calibrated range and zero where the clamp saturates.
    """
    codes = np.round(scale * (x.data - x_min))
    inside = (codes >= 0) & (codes <= levels)
    out = (np.clip(codes, 0, levels) / scale + x_min).astype(x.dtype, copy=False)

    def _bw(g):
        x._accumulate(g * inside)

    return _make(out, (x,), _bw)


def broadcast_add(x: Tensor, const: np.ndarray) -> Tensor:
    """Add a constant array (no gradient) to ``x``."""
    def _bw(g):
        x._accumulate(_unbroadcast(g, x.shape))

    return _make(x.data + const, (x,), _bw)
