"""Separate source/channel coding baseline.

Word-level Huffman or fixed 5-bit source coding, shortened Reed-Solomon codes
over GF(256), Gray-mapped square 64-QAM and the same fading link as the
semantic transceiver, with zero-forcing on the supplied channel estimate.
"""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import csi as csi_mod
from .channel import noise_variance, sample_channel, zero_forcing
from .textpipe import END, UNK, Sentence, corpus_bleu

# -- source coding ---------------------------------------------------------------


@dataclass
class HuffmanCodebook:
    codes: dict[int, str]

    def __post_init__(self):
        self._decode = {c: s for s, c in self.codes.items()}

    @classmethod
    def from_frequencies(cls, freqs: dict) -> "HuffmanCodebook":
        """Build a prefix code; ties broken by first appearance in ``freqs``."""
        items = [(f, i, s) for i, (s, f) in enumerate(freqs.items()) if f > 0]
        if not items:
            raise ValueError("no symbols with positive frequency")
        if len(items) == 1:
            return cls({items[0][2]: "0"})
        heap = [(f, i, ("leaf", s)) for f, i, s in items]
        heapq.heapify(heap)
        counter = len(heap)
        while len(heap) > 1:
            f1, _, a = heapq.heappop(heap)
            f2, _, b = heapq.heappop(heap)
            heapq.heappush(heap, (f1 + f2, counter, ("node", a, b)))
            counter += 1
        codes: dict = {}
        stack = [(heap[0][2], "")]
        while stack:
            node, prefix = stack.pop()
            if node[0] == "leaf":
                codes[node[1]] = prefix
            else:
                stack.append((node[1], prefix + "0"))
                stack.append((node[2], prefix + "1"))
        return cls(codes)

    def kraft_sum(self) -> float:
        return sum(2.0 ** -len(c) for c in self.codes.values())

    def mean_length(self, freqs: dict) -> float:
        total = sum(freqs.values())
        return sum(f * len(self.codes[s]) for s, f in freqs.items()) / total

    def encode(self, symbols: Iterable) -> np.ndarray:
        bits = "".join(self.codes[s] if s in self.codes else self.codes[UNK] for s in symbols)
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")

    def decode(self, bits: np.ndarray, stop=END) -> list:
        out, cur = [], ""
        for b in np.asarray(bits, dtype=np.uint8):
            cur += "1" if b else "0"
            sym = self._decode.get(cur)
            if sym is not None:
                if sym == stop:
                    return out
                out.append(sym)
                cur = ""
        return out


class Fixed5Codebook:
    """Five-bit indices for the 31 most frequent symbols, code 31 escapes to a 16-bit id."""

    ESCAPE = 31

    def __init__(self, freqs: dict):
        ranked = sorted(freqs.items(), key=lambda kv: -kv[1])
        self.table = [s for s, _ in ranked[: self.ESCAPE]]
        self.index = {s: i for i, s in enumerate(self.table)}

    @staticmethod
    def _bits(value: int, width: int) -> list[int]:
        return [(value >> (width - 1 - i)) & 1 for i in range(width)]

    def encode(self, symbols: Iterable) -> np.ndarray:
        out: list[int] = []
        for s in symbols:
            i = self.index.get(s)
            if i is not None:
                out += self._bits(i, 5)
            else:
                out += self._bits(self.ESCAPE, 5) + self._bits(int(s) & 0xFFFF, 16)
        return np.array(out, dtype=np.uint8)

    def decode(self, bits: np.ndarray, stop=END, vocab_size: int | None = None) -> list:
        bits = np.asarray(bits, dtype=np.uint8)
        out, pos = [], 0
        while pos + 5 <= len(bits):
            code = int("".join(map(str, bits[pos : pos + 5])), 2)
            pos += 5
            if code == self.ESCAPE:
                if pos + 16 > len(bits):
                    break
                sym = int("".join(map(str, bits[pos : pos + 16])), 2)
                pos += 16
                if vocab_size is not None and sym >= vocab_size:
                    sym = UNK
            elif code < len(self.table):
                sym = self.table[code]
            else:
                sym = UNK
            if sym == stop:
                break
            out.append(sym)
        return out


def symbol_frequencies(sentences: Sequence) -> Counter:
    """Token counts plus one END per sentence; UNK always present."""
    freqs: Counter = Counter()
    for s in sentences:
        freqs.update(s.tokens if isinstance(s, Sentence) else s)
    freqs[END] += len(sentences)
    freqs[UNK] = max(freqs[UNK], 1)
    return freqs


def build_codebook(scheme: str, sentences: Sequence):
    freqs = symbol_frequencies(sentences)
    if scheme == "huffman":
        return HuffmanCodebook.from_frequencies(freqs)
    if scheme == "fixed5":
        return Fixed5Codebook(freqs)
    raise ValueError(f"unknown source coding scheme {scheme!r}")


def source_encode(tokens: Sequence[int], codebook) -> np.ndarray:
    return codebook.encode(list(tokens) + [END])


def source_decode(bits: np.ndarray, codebook, vocab_size: int | None = None) -> list[int]:
    if isinstance(codebook, Fixed5Codebook):
        return codebook.decode(bits, vocab_size=vocab_size)
    return codebook.decode(bits)


# -- GF(256) and Reed-Solomon --------------------------------------------------------
_PRIM = 0x11D
_EXP = np.zeros(512, dtype=np.int64)
_LOG = np.zeros(256, dtype=np.int64)
_x = 1
for _i in range(255):
    _EXP[_i] = _x
    _LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= _PRIM
_EXP[255:510] = _EXP[:255]
_EXP_L = [int(v) for v in _EXP]
_LOG_L = [int(v) for v in _LOG]


def _mul(a: int, b: int) -> int:
    # scalar fast path for the decoder's inner loops
    if a == 0 or b == 0:
        return 0
    return _EXP_L[_LOG_L[a] + _LOG_L[b]]


def gf_mul(a, b):
    """Elementwise product in GF(256); works on ints or arrays."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    out = _EXP[(_LOG[a] + _LOG[b]) % 255]
    return np.where((a == 0) | (b == 0), 0, out)


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("zero has no inverse in GF(256)")
    return _EXP_L[255 - _LOG_L[a]]


def gf_pow(a: int, e: int) -> int:
    if a == 0:
        return 0 if e else 1
    return _EXP_L[(_LOG_L[a] * e) % 255]


def _poly_eval(p: Sequence[int], x: int) -> int:
    """Evaluate a polynomial with lowest-degree coefficient first."""
    y = 0
    for c in reversed(p):
        y = _mul(y, x) ^ c
    return y


@dataclass(frozen=True)
class RsCode:
    n: int
    k: int

    def __post_init__(self):
        if not 0 < self.k < self.n <= 255:
            raise ValueError(f"invalid RS parameters n={self.n}, k={self.k}")

    @property
    def nsym(self) -> int:
        return self.n - self.k

    @property
    def t(self) -> int:
        return self.nsym // 2

    @property
    def generator(self) -> list[int]:
        """``prod_{i < n-k} (x - alpha^i)``, highest-degree coefficient first."""
        g = [1]
        for i in range(self.nsym):
            root = gf_pow(2, i)
            nxt = g + [0]
            for j in range(len(g)):
                nxt[j + 1] ^= _mul(g[j], root)
            g = nxt
        return g


def rs_encode_blocks(msgs: np.ndarray, code: RsCode) -> np.ndarray:
    """Systematic encoding of ``(blocks, k)`` byte arrays to ``(blocks, n)``."""
    msgs = np.atleast_2d(np.asarray(msgs, dtype=np.int64))
    if msgs.shape[1] != code.k:
        raise ValueError(f"expected blocks of {code.k} symbols")
    g = code.generator
    rem = np.zeros((len(msgs), code.nsym), dtype=np.int64)
    for j in range(code.k):
        coef = msgs[:, j] ^ rem[:, 0]
        rem = np.concatenate([rem[:, 1:], np.zeros((len(msgs), 1), dtype=np.int64)], axis=1)
        for i in range(code.nsym):
            rem[:, i] ^= gf_mul(coef, g[i + 1])
    return np.concatenate([msgs, rem], axis=1)


def rs_syndromes(blocks: np.ndarray, code: RsCode) -> np.ndarray:
    blocks = np.atleast_2d(np.asarray(blocks, dtype=np.int64))
    powers = code.n - 1 - np.arange(code.n)
    S = np.zeros((len(blocks), code.nsym), dtype=np.int64)
    for j in range(code.nsym):
        xs = np.array([gf_pow(2, (j * p) % 255) for p in powers])
        acc = np.zeros(len(blocks), dtype=np.int64)
        for i in range(code.n):
            acc ^= gf_mul(blocks[:, i], xs[i])
        S[:, j] = acc
    return S


def _berlekamp_massey(S: Sequence[int]) -> list[int]:
    """Error locator, lowest-degree coefficient first."""
    C, B = [1], [1]
    L, m, b = 0, 1, 1
    for n_ in range(len(S)):
        d = S[n_]
        for i in range(1, L + 1):
            if i < len(C):
                d ^= _mul(C[i], S[n_ - i])
        if d == 0:
            m += 1
            continue
        coef = _mul(d, gf_inv(b))
        T = list(C)
        shifted = [0] * m + [_mul(coef, x) for x in B]
        if len(shifted) > len(C):
            C = C + [0] * (len(shifted) - len(C))
        for i, x in enumerate(shifted):
            C[i] ^= x
        if 2 * L <= n_:
            L, B, b, m = n_ + 1 - L, T, d, 1
        else:
            m += 1
    while len(C) > 1 and C[-1] == 0:
        C.pop()
    return C


def rs_decode_block(block: Sequence[int], code: RsCode, syndromes: Sequence[int] | None = None) -> tuple[np.ndarray, bool]:
    """Correct up to ``t`` symbol errors. Returns ``(codeword, ok)``; on failure the input is returned."""
    r = np.array(block, dtype=np.int64)
    S = [int(s) for s in (syndromes if syndromes is not None else rs_syndromes(r[None], code)[0])]
    if not any(S):
        return r, True
    lam = _berlekamp_massey(S)
    nerr = len(lam) - 1
    if nerr > code.t:
        return r, False
    # Chien search over the shortened positions; index i carries x^(n-1-i)
    positions = []
    for i in range(code.n):
        X = gf_pow(2, code.n - 1 - i)
        if _poly_eval(lam, gf_inv(X)) == 0:
            positions.append((i, X))
    if len(positions) != nerr:
        return r, False
    omega = [0] * code.nsym
    for i, s in enumerate(S):
        for j, l in enumerate(lam):
            if i + j < code.nsym:
                omega[i + j] ^= _mul(s, l)
    dlam = [lam[i] if i % 2 == 1 else 0 for i in range(1, len(lam))]
    out = r.copy()
    for i, X in positions:
        Xi = gf_inv(X)
        den = _poly_eval(dlam, Xi)
        if den == 0:
            return r, False
        mag = _mul(X, _mul(_poly_eval(omega, Xi), gf_inv(den)))
        out[i] ^= mag
    powers = [code.n - 1 - i for i in range(code.n)]
    for j in range(code.nsym):
        acc = 0
        for c, p in zip(out.tolist(), powers):
            acc ^= _mul(c, gf_pow(2, j * p))
        if acc:
            return r, False
    return out, True


def rs_decode_blocks(blocks: np.ndarray, code: RsCode) -> tuple[np.ndarray, np.ndarray]:
    """Decode ``(blocks, n)``; returns the message symbols and a per-block success flag."""
    blocks = np.atleast_2d(np.asarray(blocks, dtype=np.int64))
    S = rs_syndromes(blocks, code)
    out = blocks.copy()
    ok = np.ones(len(blocks), dtype=bool)
    for b in np.flatnonzero(S.any(axis=1)):
        out[b], ok[b] = rs_decode_block(blocks[b], code, S[b])
    return out[:, : code.k], ok


def bits_to_bytes(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    pad = (-len(bits)) % 8
    return np.packbits(np.concatenate([bits, np.zeros(pad, np.uint8)])).astype(np.int64)


def bytes_to_bits(data: np.ndarray) -> np.ndarray:
    return np.unpackbits(np.asarray(data, dtype=np.uint8))


def rs_encode(bits: np.ndarray, code: RsCode) -> np.ndarray:
    """Pad the payload to whole blocks of ``k`` bytes and return the coded bits."""
    data = bits_to_bytes(bits)
    pad = (-len(data)) % code.k
    data = np.concatenate([data, np.zeros(pad, np.int64)]).reshape(-1, code.k)
    return bytes_to_bits(rs_encode_blocks(data, code).ravel())


def rs_decode(bits: np.ndarray, code: RsCode) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`rs_encode`; failed blocks are passed through uncorrected."""
    data = bits_to_bytes(bits)
    data = data[: len(data) - len(data) % code.n].reshape(-1, code.n)
    msg, ok = rs_decode_blocks(data, code)
    return bytes_to_bits(msg.ravel()), ok


# -- 64-QAM ------------------------------------------------------------------------------
_PAM = np.arange(-7, 8, 2, dtype=np.float64)  # 8 levels
_GRAY = np.array([i ^ (i >> 1) for i in range(8)])  # level index -> gray word
_UNGRAY = np.argsort(_GRAY)  # gray word -> level index
QAM_SCALE = np.sqrt(42.0)


def qam64_modulate(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped square 64-QAM with unit average energy; pads bits to a multiple of 6."""
    bits = np.asarray(bits, dtype=np.int64)
    bits = np.concatenate([bits, np.zeros((-len(bits)) % 6, np.int64)]).reshape(-1, 6)
    w = bits @ np.array([32, 16, 8, 4, 2, 1])
    i_word, q_word = w >> 3, w & 7
    return (_PAM[_UNGRAY[i_word]] + 1j * _PAM[_UNGRAY[q_word]]) / QAM_SCALE


def qam64_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Hard-decision nearest-point demodulation back to bits."""
    s = np.asarray(symbols) * QAM_SCALE

    def axis(v):
        idx = np.clip(np.round((v + 7) / 2), 0, 7).astype(np.int64)
        return _GRAY[idx]

    w = (axis(s.real) << 3) | axis(s.imag)
    return ((w[:, None] >> np.arange(5, -1, -1)) & 1).astype(np.uint8).ravel()


def qam64_constellation() -> np.ndarray:
    return qam64_modulate(np.unpackbits(np.arange(64, dtype=np.uint8)[:, None], axis=1)[:, 2:].ravel())


# -- end-to-end baseline ------------------------------------------------------------------
SCHEMES = {"huffman": RsCode(7, 5), "fixed5": RsCode(9, 7)}


@dataclass
class BaselineResult:
    bleu: float
    candidates: list = field(default_factory=list)
    rs_failures: int = 0
    blocks: int = 0
    zf_failures: int = 0


def transmit_symbols(
    syms: np.ndarray,
    kind: str,
    snr_db: float | None,
    csi_mode: str,
    rng: np.random.Generator,
    n_ant: int = 1,
    k: float = 2.0,
    denoiser=None,
) -> np.ndarray:
    """Send complex unit-energy symbols over one fading block and zero-force.

    Symbols are scaled by sqrt(2) so each real dimension carries unit power,
    the same SNR convention as the semantic transceiver.
    """
    count = len(syms)
    pad = (-count) % n_ant
    x = np.concatenate([syms, np.zeros(pad, complex)]).reshape(-1, n_ant).T * np.sqrt(2.0)
    Xr = np.concatenate([x.real, x.imag], axis=0)
    ch = sample_channel(kind, n_ant, k=k, rng=rng)
    Y = ch.H @ Xr
    if snr_db is not None:
        Y = Y + rng.standard_normal(Y.shape) * np.sqrt(noise_variance(snr_db))
    est = csi_mod.estimate(csi_mode, ch, snr_db, rng, denoiser)
    Z = Y if est.H_est is None else zero_forcing(Y, est.H_real)
    z = (Z[:n_ant] + 1j * Z[n_ant:]).T.reshape(-1) / np.sqrt(2.0)
    return z[:count]


def baseline_pipeline(
    sentences: Sequence,
    codebook,
    rs: RsCode,
    kind: str,
    snr_db: float | None,
    csi_mode: str = "perfect",
    seed: int = 0,
    n_ant: int = 1,
    k: float = 2.0,
    vocab_size: int | None = None,
    denoiser=None,
) -> BaselineResult:
    """Source code, RS-protect, 64-QAM, fade, equalise and decode every sentence; corpus BLEU."""
    rng = np.random.default_rng(seed)
    res = BaselineResult(0.0)
    refs = []
    for s in sentences:
        toks = list(s.tokens) if isinstance(s, Sentence) else list(s)
        refs.append(toks)
        coded = rs_encode(source_encode(toks, codebook), rs)
        syms = qam64_modulate(coded)
        try:
            rx = transmit_symbols(syms, kind, snr_db, csi_mode, rng, n_ant, k, denoiser)
        except np.linalg.LinAlgError:
            res.zf_failures += 1
            res.candidates.append([])
            continue
        bits = qam64_demodulate(rx)[: len(coded)]
        payload, ok = rs_decode(bits, rs)
        res.blocks += len(ok)
        res.rs_failures += int((~ok).sum())
        res.candidates.append(source_decode(payload, codebook, vocab_size))
    res.bleu = corpus_bleu(res.candidates, refs)
    return res
