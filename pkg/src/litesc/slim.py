"""Model compression: global magnitude pruning, weight and activation quantisation.

Pruning and quantisation act on the weight matrices of a model (``*.W`` and
embedding ``*.E`` tensors). Biases and layer-norm parameters are left in full
precision and are not counted in ``M``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .channel import EmaRange
from .nncore import ParamSet, Tensor, no_grad
from .nncore.checkpoint import QuantizedArray
from .nncore.functional import fake_quantize

FP_BITS = 32


@dataclass
class PruneConfig:
    gamma: float
    fine_tune_epochs: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"sparsity ratio must lie in [0, 1), got {self.gamma}")
        if self.fine_tune_epochs < 0:
            raise ValueError("fine_tune_epochs must be >= 0")


@dataclass
class QuantConfig:
    m_bits: int
    ema_c: float = 0.1
    calibration_batches: int = 8
    weight_ranges: dict = field(default_factory=dict)
    act_ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m_bits < 1:
            raise ValueError("m_bits must be >= 1")
        if not 0.0 <= self.ema_c <= 1.0:
            raise ValueError("EMA coefficient must lie in [0, 1]")

    @property
    def levels(self) -> int:
        return 2**self.m_bits - 1


def default_weight_names(params: ParamSet) -> list[str]:
    return [n for n in params if n.endswith(".W") or n.endswith(".E")]


# -- pruning -------------------------------------------------------------------------------
def prune_threshold(magnitudes: np.ndarray, gamma: float) -> float | None:
    """``s_{floor(M gamma)}`` of the ascending magnitudes (1-based); None when that index is 0."""
    s = np.sort(np.asarray(magnitudes, dtype=np.float64).ravel())
    idx = int(math.floor(len(s) * gamma))
    return None if idx == 0 else float(s[idx - 1])


def prune(params: ParamSet, cfg: PruneConfig, names: Sequence[str] | None = None, inplace: bool = False):
    """Zero every weight with ``|w| <= w_thre`` under one global threshold.

    Returns ``(params, masks)``; masks are 1 for surviving weights and are
    meant to be kept for fine-tuning so pruned entries stay at zero.
    """
    names = list(names) if names is not None else default_weight_names(params)
    out = params if inplace else params.copy()
    mags = np.concatenate([np.abs(out[n].data).ravel() for n in names])
    thr = prune_threshold(mags, cfg.gamma)
    if thr is None:
        return out, {n: np.ones(out[n].shape, dtype=out[n].dtype) for n in names}
    masks = {}
    for n in names:
        keep = (np.abs(out[n].data) > thr).astype(out[n].dtype)
        out[n].data = out[n].data * keep
        masks[n] = keep
    return out, masks


def sparsity(masks: dict) -> float:
    total = sum(m.size for m in masks.values())
    kept = sum(int(m.sum()) for m in masks.values())
    return 1.0 - kept / total


def prune_model(model, gamma: float):
    """Prune a transceiver in place and attach the masks used by its optimiser."""
    _, masks = prune(model.params, PruneConfig(gamma), model.weight_names(), inplace=True)
    model.masks = masks
    return masks


# -- weight quantisation -----------------------------------------------------------------------
def quantize_array(W: np.ndarray, m_bits: int, mask: np.ndarray | None = None) -> QuantizedArray:
    """``code = round(q_w (W - min W))`` with ``q_w = (2^m - 1) / (max W - min W)``.

    The range is taken over surviving entries when a pruning mask is given.
    A constant layer is stored as all-zero codes flagged degenerate.
    """
    W = np.asarray(W, dtype=np.float64)
    vals = W[mask.astype(bool)] if mask is not None else W
    if vals.size == 0:
        return QuantizedArray(np.zeros(W.shape, np.int64), m_bits, 0.0, 1.0, True, mask)
    lo, hi = float(vals.min()), float(vals.max())
    if not hi > lo:
        return QuantizedArray(np.zeros(W.shape, np.int64), m_bits, lo, 1.0, True, mask)
    levels = 2**m_bits - 1
    scale = levels / (hi - lo)
    codes = np.clip(np.round(scale * (W - lo)), 0, levels).astype(np.int64)
    if mask is not None:
        codes = codes * mask.astype(np.int64)
    return QuantizedArray(codes, m_bits, lo, scale, False, mask)


def quantize_weights(params: ParamSet, cfg: QuantConfig, names=None, masks: dict | None = None) -> dict[str, QuantizedArray]:
    """Per-layer integer codes for every weight matrix; records the ranges in ``cfg``."""
    names = list(names) if names is not None else default_weight_names(params)
    masks = masks or {}
    out = {}
    for n in names:
        q = quantize_array(params[n].data, cfg.m_bits, masks.get(n))
        cfg.weight_ranges[n] = (q.minimum, None if q.degenerate else q.minimum + cfg.levels / q.scale)
        out[n] = q
    return out


def dequantize_into(params: ParamSet, quantized: dict[str, QuantizedArray]) -> ParamSet:
    out = params.copy()
    for n, q in quantized.items():
        out[n].data = q.dequantize().astype(out[n].dtype)
    return out


def weight_fake_quantizer(m_bits: int, names: Sequence[str], masks: dict | None = None):
    """Forward-pass weight transform: quantise-dequantise with a straight-through gradient."""
    names = set(names)
    masks = masks or {}
    levels = 2**m_bits - 1

    def transform(name: str, W: Tensor) -> Tensor:
        if name not in names:
            return W
        mask = masks.get(name)
        vals = W.data[mask.astype(bool)] if mask is not None else W.data
        if vals.size == 0:
            return W
        lo, hi = float(vals.min()), float(vals.max())
        if not hi > lo:
            return W
        out = fake_quantize(W, lo, levels / (hi - lo), levels)
        if mask is not None:
            out = out * Tensor(mask, dtype=W.dtype)
        return out

    return transform


# -- activation quantisation --------------------------------------------------------------------
def activation_fake_quantizer(ranges: dict, m_bits: int):
    levels = 2**m_bits - 1

    def transform(tag: str, x: Tensor) -> Tensor:
        r = ranges.get(tag)
        if r is None or not r[1] > r[0]:
            return x
        return fake_quantize(x, r[0], levels / (r[1] - r[0]), levels)

    return transform


def calibrate_and_quantize_activations(model, calib_batches, cfg: QuantConfig, run_batch) -> QuantConfig:
    """Track per-layer activation ranges with an EMA, then install the quantiser.

    ``run_batch(model, batch)`` performs one forward pass (no gradient needed).
    The first batch seeds each range; later batches move it by a fraction
    ``cfg.ema_c`` toward the new extremes.
    """
    trackers: dict[str, EmaRange] = {}

    def observe(tag: str, x: Tensor) -> Tensor:
        trackers.setdefault(tag, EmaRange(cfg.ema_c)).update(x.data)
        return x

    previous = model.act_transform
    model.act_transform = observe
    try:
        seen = 0
        for batch in calib_batches:
            if seen >= cfg.calibration_batches:
                break
            with no_grad():
                run_batch(model, batch)
            seen += 1
    finally:
        model.act_transform = previous
    if seen == 0:
        raise ValueError("need at least one calibration batch")
    cfg.act_ranges = {tag: (t.lo, t.hi) for tag, t in trackers.items()}
    model.act_transform = activation_fake_quantizer(cfg.act_ranges, cfg.m_bits)
    return cfg


def activation_codes(x: np.ndarray, rng_pair: tuple[float, float], m_bits: int) -> np.ndarray:
    lo, hi = rng_pair
    levels = 2**m_bits - 1
    return np.clip(np.round(levels / (hi - lo) * (np.asarray(x) - lo)), 0, levels).astype(np.int64)


def enable_weight_quantization(model, cfg: QuantConfig) -> None:
    model.weight_transform = weight_fake_quantizer(cfg.m_bits, model.weight_names(), model.masks)


def disable_quantization(model) -> None:
    model.weight_transform = None
    model.act_transform = None


# -- compression ratio ---------------------------------------------------------------------------
def compression_ratio(M: int, M_pruned: int, m_bits: int) -> float:
    """``psi = 32 M / (M_pruned m)``."""
    if M_pruned < 1:
        raise ValueError("at least one weight must survive pruning")
    if m_bits < 1:
        raise ValueError("m_bits must be >= 1")
    return FP_BITS * M / (M_pruned * m_bits)


def nominal_ratio(gamma: float, m_bits: int) -> float:
    """Ratio with ``M_pruned = (1 - gamma) M``."""
    PruneConfig(gamma)
    return FP_BITS / ((1.0 - gamma) * m_bits)


@dataclass
class CompressionReport:
    M: int
    M_pruned: int
    gamma: float
    m: int
    psi: float
    psi_nominal: float
    bleu_before: float = float("nan")
    bleu_after: float = float("nan")
    note: str = "biases and layer-norm parameters excluded from M"

    @classmethod
    def from_masks(cls, masks: dict, gamma: float, m_bits: int, **kw) -> "CompressionReport":
        M = sum(m.size for m in masks.values())
        kept = sum(int(m.sum()) for m in masks.values())
        return cls(M, kept, gamma, m_bits, compression_ratio(M, kept, m_bits), nominal_ratio(gamma, m_bits), **kw)

    def csv_row(self, header: bool = False) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(asdict(self)))
        if header:
            w.writeheader()
        w.writerow(asdict(self))
        return buf.getvalue()


# -- quantisation-aware fine-tuning -----------------------------------------------------------
def forward_batch_runner(kind: str, snr_db: float | None, csi_mode: str, seed: int = 0, k: float = 2.0, denoiser=None):
    """``run_batch`` for calibration: one transmit-channel-receive pass over a sentence list."""
    from . import deepsc

    rng = np.random.default_rng(seed)

    def run(model, sentences):
        ids, mask = deepsc.make_batch(sentences, model.cfg.vocab_size)
        X = model.transmitter(ids, mask)
        Z, _ = deepsc.channel_pass(model, X, kind, snr_db, csi_mode, rng, k, denoiser)
        model.receiver(Z, mask)

    return run


def quantize_model(model, cfg: QuantConfig, calib_sentences, kind: str, snr_db: float | None, csi_mode: str,
                   batch_size: int = 64, seed: int = 0, denoiser=None) -> QuantConfig:
    """Install weight fake-quantisation, then calibrate and install activation quantisation."""
    from . import deepsc

    enable_weight_quantization(model, cfg)
    quantize_weights(model.params, cfg, model.weight_names(), model.masks)
    rng = np.random.default_rng(seed)
    batches = [[calib_sentences[i] for i in idx] for idx in deepsc.length_batches(calib_sentences, batch_size, rng)]
    run = forward_batch_runner(kind, snr_db, csi_mode, seed, denoiser=denoiser)
    return calibrate_and_quantize_activations(model, batches, cfg, run)


def qat_finetune(model, cfg: QuantConfig, corpus, epochs: int, train_cfg=None, denoiser=None, calibrate: bool = True):
    """Fine-tune through the quantise-dequantise forward pass (straight-through backward).

    Pruning masks on ``model`` stay in force, so pruned weights remain zero.
    Activation ranges are re-calibrated after training so the final model is
    consistent with its updated weights.
    """
    from . import deepsc

    train_cfg = train_cfg or deepsc.TrainConfig()
    train_cfg = deepsc.TrainConfig(**{**asdict(train_cfg), "epochs": epochs})
    if model.weight_transform is None or (calibrate and not cfg.act_ranges):
        quantize_model(model, cfg, corpus, train_cfg.channel, float(np.mean(train_cfg.snr_db)), train_cfg.csi_mode,
                       seed=train_cfg.seed, denoiser=denoiser)
    log = deepsc.train(model, corpus, train_cfg, denoiser=denoiser)
    if calibrate:
        model.act_transform = None
        quantize_model(model, cfg, corpus, train_cfg.channel, float(np.mean(train_cfg.snr_db)), train_cfg.csi_mode,
                       seed=train_cfg.seed, denoiser=denoiser)
    return model, log


def finetune_pruned(model, corpus, epochs: int, train_cfg=None, denoiser=None):
    """Retrain surviving weights after :func:`prune_model`; masked entries never move."""
    from . import deepsc

    train_cfg = train_cfg or deepsc.TrainConfig()
    train_cfg = deepsc.TrainConfig(**{**asdict(train_cfg), "epochs": epochs})
    return deepsc.train(model, corpus, train_cfg, denoiser=denoiser)
