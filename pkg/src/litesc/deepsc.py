"""Transformer semantic transceiver trained end to end over fading channels.

Transmitter: token embedding with sinusoidal positions, transformer encoder
blocks (semantic encoder, partition ``beta``) and a two-layer dense channel
encoder (``alpha``) producing ``symbol_dim`` reals per token. Symbols are
power-normalised per sentence, optionally snapped to a finite constellation,
and sent ``2 * n_ant`` reals per channel use over one block-fading matrix per
sentence.

Receiver: optional zero-forcing with the available channel estimate, a dense
channel decoder (``delta``: Dense 1, Dense 2, Dense 3 and a LayerNorm over
Dense 1 + Dense 3) and transformer decoder blocks with a softmax prediction
layer (``chi``). Decoding is non-autoregressive: every position is predicted
in one pass and the sentence is read greedily up to the first END.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import csi as csi_mod
from .channel import KINDS, ChannelRealization, ConstellationSpec, EmaRange, constellation_quantize_dequantize, sample_channel, transmit, zero_forcing
from .nncore import Adam, LayerSpec, ParamSet, StateError, Tensor, backward, clip_grad_norm, init_params, no_grad
from .nncore import functional as F
from .nncore.checkpoint import load_checkpoint, save_checkpoint
from .nncore.graph import transformer_block
from .nncore.tensor import relu, reshape, sqrt, transpose, tsum
from .textpipe import END, PAD, UNK, Sentence, corpus_bleu

log = logging.getLogger(__name__)

CSI_MODES = csi_mod.MODES
LOG_COLUMNS = ("epoch", "loss", "bleu", "csi_mode", "snr_db", "seed")


class ConfigError(ValueError):
    pass


class TrainingDiverged(StateError):
    pass


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ff_units: int = 128
    symbol_dim: int = 16
    n_ant: int = 1
    max_len: int = 64

    def __post_init__(self):
        if self.vocab_size <= UNK:
            raise ConfigError("vocabulary must hold the reserved tokens")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.heads} heads")
        if self.symbol_dim % (2 * self.n_ant):
            raise ConfigError(f"symbol_dim {self.symbol_dim} must be a multiple of 2 * n_ant = {2 * self.n_ant}")

    @classmethod
    def full_scale(cls, vocab_size: int, **kw) -> "ModelConfig":
        """Full-size widths: 128 / 512 / 128, 8 heads, 3 blocks."""
        base = dict(d_model=128, heads=8, enc_layers=3, dec_layers=3, ff_units=512)
        base.update(kw)
        return cls(vocab_size, **base)


@dataclass
class TrainConfig:
    csi_mode: str = "perfect"
    channel: str = "rayleigh"
    snr_db: tuple[float, float] = (0.0, 12.0)
    batch_size: int = 64
    epochs: int = 10
    lr: float = 1e-3
    seed: int = 0
    k: float = 2.0
    clip_norm: float = 5.0
    eval_snr_db: float | None = None
    eval_size: int = 128

    def __post_init__(self):
        if isinstance(self.snr_db, (int, float)):
            self.snr_db = (float(self.snr_db), float(self.snr_db))
        self.snr_db = tuple(float(v) for v in self.snr_db)
        problems = []
        if self.csi_mode not in CSI_MODES:
            problems.append(f"csi_mode {self.csi_mode!r} not in {CSI_MODES}")
        if self.channel not in KINDS:
            problems.append(f"channel {self.channel!r} not in {KINDS}")
        if len(self.snr_db) != 2 or self.snr_db[0] > self.snr_db[1]:
            problems.append(f"empty SNR range {self.snr_db}")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))


# -- model ----------------------------------------------------------------------
def _positions(max_len: int, d: int) -> np.ndarray:
    pos = np.arange(max_len)[:, None]
    i = np.arange(d // 2)[None, :]
    ang = pos / np.power(10000.0, 2 * i / d)
    out = np.zeros((max_len, d))
    out[:, 0::2] = np.sin(ang)
    out[:, 1::2] = np.cos(ang)
    return out


class _WeightView:
    """Read-only view over a ParamSet that applies a per-tensor transform."""

    def __init__(self, params: ParamSet, transform: Callable[[str, Tensor], Tensor] | None):
        self.params = params
        self.transform = transform
        self._cache: dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        if self.transform is None:
            return self.params[name]
        if name not in self._cache:
            self._cache[name] = self.transform(name, self.params[name])
        return self._cache[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def pair(self, prefix: str):
        return self[f"{prefix}.W"], self[f"{prefix}.b"]


class TransceiverModel:
    """Parameters, layer layout and optional quantisation hooks of the transceiver.

    ``weight_transform(name, W)`` and ``act_transform(tag, X)`` are applied in
    every forward pass when set; :mod:`litesc.slim` uses them for
    quantisation-aware training and activation calibration.
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=None):
        self.cfg = cfg
        self.seed = seed
        rng = np.random.default_rng(seed)
        d = cfg.d_model
        self.enc_specs = [LayerSpec("embedding", "tx_emb", units=d)] + [
            LayerSpec("transformer_block", f"enc{i}", heads=cfg.heads, ff_units=cfg.ff_units) for i in range(cfg.enc_layers)
        ]
        self.ce_specs = [
            LayerSpec("dense", "ce1", units=2 * d),
            LayerSpec("relu"),
            LayerSpec("dense", "ce2", units=cfg.symbol_dim),
        ]
        self.cd_specs = [
            LayerSpec("dense", "rx1", units=d),
            LayerSpec("relu"),
            LayerSpec("dense", "rx2", units=4 * d),
            LayerSpec("relu"),
            LayerSpec("dense", "rx3", units=d),
            LayerSpec("layer_norm", "rxln"),
        ]
        self.dec_specs = [
            LayerSpec("transformer_block", f"dec{i}", heads=cfg.heads, ff_units=cfg.ff_units) for i in range(cfg.dec_layers)
        ] + [LayerSpec("prediction", "pred", units=cfg.vocab_size)]
        p = ParamSet()
        init_params(self.enc_specs, cfg.vocab_size, rng, "beta", p, dtype)
        init_params(self.ce_specs, d, rng, "alpha", p, dtype)
        init_params(self.cd_specs, cfg.symbol_dim, rng, "delta", p, dtype)
        init_params(self.dec_specs, d, rng, "chi", p, dtype)
        self.params = p
        self.pos = _positions(cfg.max_len, d)
        self.constellation: ConstellationSpec | None = None
        self.masks: dict[str, np.ndarray] = {}
        self.weight_transform: Callable[[str, Tensor], Tensor] | None = None
        self.act_transform: Callable[[str, Tensor], Tensor] | None = None
        self.oov_count = 0

    # names of weight matrices (the connections that pruning and quantisation act on)
    def weight_names(self) -> list[str]:
        return [n for n in self.params if n.endswith(".W") or n.endswith(".E")]

    def _act(self, tag: str, x: Tensor) -> Tensor:
        return x if self.act_transform is None else self.act_transform(tag, x)

    def view(self) -> _WeightView:
        return _WeightView(self.params, self.weight_transform)

    # -- transmitter ------------------------------------------------------
    def semantic_encode(self, ids: np.ndarray, mask: np.ndarray, P=None) -> Tensor:
        P = P or self.view()
        L = ids.shape[1]
        if L > self.cfg.max_len:
            raise ConfigError(f"sentence length {L} exceeds max_len {self.cfg.max_len}")
        # scale so token identity is not swamped by the unit-amplitude positions
        x = F.embedding(P["tx_emb.E"], ids) * math.sqrt(self.cfg.d_model)
        x = F.broadcast_add(x, self.pos[:L].astype(x.dtype))
        for spec in self.enc_specs[1:]:
            x = self._act(spec.name, transformer_block(x, P, spec.name, spec.heads, mask))
        return x

    def channel_encode(self, x: Tensor, mask: np.ndarray, P=None) -> Tensor:
        P = P or self.view()
        h = self._act("ce1", relu(F.dense(x, *P.pair("ce1"))))
        X = self._act("ce2", F.dense(h, *P.pair("ce2")))
        return normalize_power(X, mask)

    def transmitter(self, ids: np.ndarray, mask: np.ndarray) -> Tensor:
        P = self.view()
        X = self.channel_encode(self.semantic_encode(ids, mask, P), mask, P)
        if self.constellation is not None:
            X = constellation_quantize_dequantize(X, self.constellation)
            X = X * Tensor(mask[..., None].astype(X.dtype), dtype=X.dtype)
        return X

    # -- receiver ---------------------------------------------------------
    def receiver(self, Z: Tensor, mask: np.ndarray) -> Tensor:
        """Map equalised symbols ``(B, L, symbol_dim)`` to token probabilities."""
        P = self.view()
        d1 = self._act("rx1", relu(F.dense(Z, *P.pair("rx1"))))
        d2 = self._act("rx2", relu(F.dense(d1, *P.pair("rx2"))))
        d3 = self._act("rx3", F.dense(d2, *P.pair("rx3")))
        h = F.layer_norm(d1 + d3, P["rxln.g"], P["rxln.b"])
        for spec in self.dec_specs[:-1]:
            h = self._act(spec.name, transformer_block(h, P, spec.name, spec.heads, mask))
        return F.softmax(F.dense(h, *P.pair("pred")))

    # -- persistence ------------------------------------------------------
    def metadata(self) -> dict:
        meta = {"model": asdict(self.cfg), "seed": self.seed}
        if self.constellation is not None:
            meta["constellation"] = self.constellation.to_dict()
        return meta

    def save(self, path, quantized=None) -> int:
        return save_checkpoint(path, self.params, self.metadata(), quantized)

    @classmethod
    def load(cls, path) -> "TransceiverModel":
        params, meta, _ = load_checkpoint(path)
        model = cls(ModelConfig(**meta["model"]), seed=meta.get("seed", 0))
        model.params.load_state(params.state())
        if "constellation" in meta:
            model.constellation = ConstellationSpec(**meta["constellation"])
        return model


def normalize_power(X: Tensor, mask: np.ndarray) -> Tensor:
    """Scale each sentence to unit mean power per real dimension over its valid tokens."""
    B, L, S = X.shape
    m = Tensor(np.repeat(mask[..., None], S, axis=-1).reshape(B, L * S).astype(X.dtype), dtype=X.dtype)
    flat = reshape(X, (B, L * S)) * m
    count = np.maximum(mask.sum(axis=1), 1).astype(X.dtype)[:, None] * S
    power = tsum(flat * flat, axis=1, keepdims=True) * Tensor(1.0 / count, dtype=X.dtype)
    out = flat / sqrt(power + 1e-12)
    return reshape(out, (B, L, S))


# -- batching ---------------------------------------------------------------------
def _token_ids(s, vocab_size: int, model: TransceiverModel | None = None) -> list[int]:
    toks = list(s.tokens) if isinstance(s, Sentence) else list(s)
    out = []
    for t in toks:
        if 0 <= t < vocab_size:
            out.append(int(t))
        else:
            out.append(UNK)
            if model is not None:
                model.oov_count += 1
    return out


def make_batch(sentences: Sequence, vocab_size: int, model: TransceiverModel | None = None):
    """Token ids with END appended, right-padded with PAD; returns ``(ids, mask)``."""
    seqs = [_token_ids(s, vocab_size, model) + [END] for s in sentences]
    L = max(len(s) for s in seqs)
    ids = np.full((len(seqs), L), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
    return ids, ids != PAD


def length_batches(sentences: Sequence, batch_size: int, rng: np.random.Generator) -> list[list[int]]:
    """Shuffled batches of similar-length sentences (less padding per batch)."""
    lengths = np.array([len(s) for s in sentences])
    order = np.lexsort((rng.random(len(lengths)), lengths))
    batches = [list(order[i : i + batch_size]) for i in range(0, len(order), batch_size)]
    return [batches[i] for i in rng.permutation(len(batches))]


# -- channel ----------------------------------------------------------------------
def to_signal(X: Tensor, n_ant: int) -> Tensor:
    """``(B, L, S)`` symbols to ``(B, 2 n_ant, L S / (2 n_ant))`` channel uses."""
    B, L, S = X.shape
    r = 2 * n_ant
    return transpose(reshape(X, (B, L * S // r, r)), (0, 2, 1))


def from_signal(Y: Tensor, L: int, S: int) -> Tensor:
    B = Y.shape[0]
    return reshape(transpose(Y, (0, 2, 1)), (B, L, S))


def equalize(Y, est: csi_mod.CsiEstimate | None):
    """Zero-force with the estimate; mode ``none`` passes ``Y`` through."""
    if est is None:
        raise ConfigError("no CSI supplied; pass CsiEstimate('none', None) to decode without CSI")
    if est.mode == "none":
        return Y
    return zero_forcing(Y, est.H_real)


@dataclass
class LinkState:
    channel: ChannelRealization
    csi: csi_mod.CsiEstimate
    snr_db: float | None


def channel_pass(
    model: TransceiverModel,
    X: Tensor,
    kind: str,
    snr_db: float | None,
    csi_mode: str,
    rng: np.random.Generator,
    k: float = 2.0,
    denoiser: csi_mod.DenoiserModel | None = None,
    ch: ChannelRealization | None = None,
) -> tuple[Tensor, LinkState]:
    """Send ``X`` over one fading block per sentence and equalise it once."""
    B, L, S = X.shape
    n = model.cfg.n_ant
    ch = ch if ch is not None else sample_channel(kind, n, k=k, rng=rng, batch=B)
    Y = transmit(to_signal(X, n), ch, snr_db, rng)
    est = csi_mod.estimate(csi_mode, ch, snr_db, rng, denoiser)
    Z = equalize(Y, est)
    return from_signal(Z, L, S), LinkState(ch, est, snr_db)


# -- public encode / decode ------------------------------------------------------------
def encode(model: TransceiverModel, sentences) -> Tensor:
    """Power-normalised (and optionally constellation-quantised) symbols ``(B, L, S)``."""
    if isinstance(sentences, Sentence):
        sentences = [sentences]
    ids, mask = make_batch(sentences, model.cfg.vocab_size, model)
    with no_grad():
        return model.transmitter(ids, mask)


def greedy(probs: np.ndarray, mask: np.ndarray) -> list[list[int]]:
    """Argmax per position, cut at the first END (or the frame length)."""
    best = probs.argmax(axis=-1)
    out = []
    for row, m in zip(best, mask):
        toks = []
        for t in row[: int(m.sum())]:
            if t == END:
                break
            toks.append(int(t))
        out.append(toks)
    return out


def decode(model: TransceiverModel, Y: Tensor, csi: csi_mod.CsiEstimate | None, mask: np.ndarray) -> list[list[int]]:
    """Equalise received channel uses ``(B, 2n, T)`` and read out token ids."""
    L = mask.shape[1]
    Z = from_signal(equalize(Y if isinstance(Y, Tensor) else Tensor(Y), csi), L, model.cfg.symbol_dim)
    with no_grad():
        probs = model.receiver(Z, mask)
    return greedy(probs.data, mask)


def transceive(
    model: TransceiverModel,
    sentences: Sequence,
    kind: str,
    snr_db: float | None,
    csi_mode: str,
    rng: np.random.Generator,
    k: float = 2.0,
    denoiser=None,
) -> list[list[int]]:
    ids, mask = make_batch(sentences, model.cfg.vocab_size, model)
    with no_grad():
        X = model.transmitter(ids, mask)
        Z, _ = channel_pass(model, X, kind, snr_db, csi_mode, rng, k, denoiser)
        probs = model.receiver(Z, mask)
    return greedy(probs.data, mask)


def evaluate(
    model: TransceiverModel,
    sentences: Sequence,
    kind: str,
    snr_db: float | None,
    csi_mode: str,
    seed: int = 0,
    k: float = 2.0,
    denoiser=None,
    batch_size: int = 128,
) -> dict:
    """Corpus BLEU, exact-sentence rate and token accuracy over ``sentences``."""
    rng = np.random.default_rng(seed)
    cands, refs = [], []
    for i in range(0, len(sentences), batch_size):
        chunk = sentences[i : i + batch_size]
        cands += transceive(model, chunk, kind, snr_db, csi_mode, rng, k, denoiser)
        refs += [_token_ids(s, model.cfg.vocab_size) for s in chunk]
    exact = float(np.mean([c == r for c, r in zip(cands, refs)]))
    hits = sum(sum(a == b for a, b in zip(c, r)) for c, r in zip(cands, refs))
    total = sum(len(r) for r in refs)
    return {"bleu": corpus_bleu(cands, refs), "exact": exact, "token_acc": hits / total, "candidates": cands}


# -- training ----------------------------------------------------------------------------
def batch_loss(
    model: TransceiverModel,
    ids: np.ndarray,
    mask: np.ndarray,
    kind: str,
    snr_db: float | None,
    csi_mode: str,
    rng: np.random.Generator,
    k: float = 2.0,
    denoiser=None,
) -> Tensor:
    X = model.transmitter(ids, mask)
    Z, _ = channel_pass(model, X, kind, snr_db, csi_mode, rng, k, denoiser)
    probs = model.receiver(Z, mask)
    return F.ce_loss(probs, ids, mask)


@dataclass
class TrainingLog:
    rows: list[dict] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [r["loss"] for r in self.rows]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=LOG_COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({c: r[c] for c in LOG_COLUMNS})


def default_denoiser(kind: str, n_ant: int, seed: int, k: float = 2.0, count: int = 20_000, epochs: int = 6):
    """Denoiser trained on LS estimates of ``kind`` channels between 0 and 10 dB."""
    rng = np.random.default_rng(10_000 + seed)
    pairs = csi_mod.make_pairs(kind, n_ant, count, (0.0, 10.0), rng, k=k)
    return csi_mod.train_denoiser(pairs, (0.0, 10.0), kind=kind, epochs=epochs, seed=seed)


def train(
    model: TransceiverModel,
    sentences: Sequence,
    cfg: TrainConfig,
    eval_sentences: Sequence | None = None,
    denoiser: csi_mod.DenoiserModel | None = None,
    optimizer: Adam | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainingLog:
    """Minimise the two-term cross entropy over the channel, one SNR draw per batch."""
    if len(sentences) == 0:
        raise ConfigError("training corpus is empty")
    if cfg.csi_mode == "refined" and denoiser is None:
        denoiser = default_denoiser(cfg.channel, model.cfg.n_ant, cfg.seed, cfg.k)
    rng = np.random.default_rng(cfg.seed)
    opt = optimizer or Adam(model.params, lr=cfg.lr, masks=model.masks)
    eval_set = list(eval_sentences if eval_sentences is not None else sentences)[: cfg.eval_size]
    eval_snr = cfg.eval_snr_db if cfg.eval_snr_db is not None else float(np.mean(cfg.snr_db))
    lo, hi = cfg.snr_db
    out = TrainingLog()
    last = float("nan")
    for epoch in range(1, cfg.epochs + 1):
        total, count = 0.0, 0
        for b, idx in enumerate(length_batches(sentences, cfg.batch_size, rng)):
            snr = float(rng.uniform(lo, hi))
            ids, mask = make_batch([sentences[i] for i in idx], model.cfg.vocab_size, model)
            loss = batch_loss(model, ids, mask, cfg.channel, snr, cfg.csi_mode, rng, cfg.k, denoiser)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"loss became {value} at epoch {epoch} batch {b} (snr {snr:.2f} dB, "
                    f"csi {cfg.csi_mode}); last finite epoch loss {last:.4f}"
                )
            backward(loss)
            if cfg.clip_norm:
                clip_grad_norm(model.params, cfg.clip_norm)
            opt.step()
            total += value * len(idx)
            count += len(idx)
        last = total / count
        score = evaluate(model, eval_set, cfg.channel, eval_snr, cfg.csi_mode, seed=cfg.seed, k=cfg.k, denoiser=denoiser)["bleu"]
        row = {"epoch": epoch, "loss": last, "bleu": score, "csi_mode": cfg.csi_mode, "snr_db": f"{lo:g}:{hi:g}", "seed": cfg.seed}
        out.rows.append(row)
        log.info("epoch %d loss %.4f bleu %.3f", epoch, last, score)
        if on_epoch is not None:
            on_epoch(row)
    return out


def encoder_grad_norms(
    model: TransceiverModel,
    sentences: Sequence,
    kind: str,
    csi_mode: str,
    snr_db: float,
    batches: int = 20,
    batch_size: int = 32,
    seed: int = 0,
    partition: str = "beta",
) -> np.ndarray:
    """Gradient norm of one partition over independent fading batches (no update)."""
    rng = np.random.default_rng(seed)
    norms = []
    names = list(model.params.by_partition(partition))
    for _ in range(batches):
        idx = rng.choice(len(sentences), size=batch_size, replace=False)
        ids, mask = make_batch([sentences[i] for i in idx], model.cfg.vocab_size)
        backward(batch_loss(model, ids, mask, kind, snr_db, csi_mode, rng))
        norms.append(np.sqrt(sum(float((model.params[n].grad.astype(np.float64) ** 2).sum()) for n in names)))
        model.params.zero_grad()
    return np.array(norms)


def calibrate_constellation(
    model: TransceiverModel, sentences: Sequence, m_bits: int, c: float = 0.1, batches: int = 8, batch_size: int = 64, seed: int = 0
) -> ConstellationSpec:
    """Track the transmitted symbol range with an EMA and attach the quantiser to ``model``."""
    rng = np.random.default_rng(seed)
    ema = EmaRange(c)
    saved, model.constellation = model.constellation, None
    try:
        for idx in length_batches(sentences, batch_size, rng)[:batches]:
            ids, mask = make_batch([sentences[i] for i in idx], model.cfg.vocab_size)
            with no_grad():
                X = model.transmitter(ids, mask)
            ema.update(X.data[mask])
    finally:
        model.constellation = saved
    spec = ConstellationSpec(m_bits, ema.lo, ema.hi)
    model.constellation = spec
    return spec
