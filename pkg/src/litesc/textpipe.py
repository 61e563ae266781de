"""Corpus ingestion, vocabulary and BLEU scoring."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, START, END, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<start>", "<end>", "<unk>")
MIN_WORDS, MAX_WORDS = 4, 30

_WORD = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


class IngestionError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lower-case and keep alphanumeric words (apostrophe contractions kept)."""
    return _WORD.findall(text.lower())


class Vocab:
    """Word <-> id bijection with ids 0-3 reserved for PAD, START, END, UNK."""

    def __init__(self, words: Iterable[str] = ()):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {w: i for i, w in enumerate(self.itos)}
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        if word not in self.stoi:
            self.stoi[word] = len(self.itos)
            self.itos.append(word)
        return self.stoi[word]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, word: str) -> bool:
        return word in self.stoi

    def encode(self, words: Sequence[str]) -> list[int]:
        return [self.stoi.get(w, UNK) for w in words]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocab":
        counts = Counter(w for s in sentences for w in s)
        # frequency order, ties alphabetical, so ids are stable for a given corpus
        return cls(w for w, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        words = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(words[:4]) != RESERVED:
            raise IngestionError("vocab file does not start with the reserved tokens")
        return cls(words[4:])


@dataclass
class Sentence:
    tokens: list[int]
    raw: str = ""

    @property
    def words(self) -> list[str]:
        return tokenize(self.raw)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class Corpus:
    train: list[Sentence]
    test: list[Sentence]
    split_ratio: float
    vocab: Vocab
    dropped: int = 0
    stats: dict = field(default_factory=dict)


def load_corpus(
    path=None,
    split_ratio: float = 0.1,
    seed: int = 0,
    min_words: int = MIN_WORDS,
    max_words: int = MAX_WORDS,
    limit: int | None = None,
) -> Corpus:
    """Read one sentence per line, filter by length, shuffle and split.

    ``path=None`` loads the bundled toy corpus. The vocabulary is built from
    the training split; test words outside it map to UNK. ``limit`` keeps only
    the first ``limit`` usable sentences (before shuffling).
    """
    if not 0.0 <= split_ratio < 1.0:
        raise ValueError("split_ratio must lie in [0, 1)")
    if path is None:
        text = resources.files("litesc").joinpath("data/toy_corpus.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    kept: list[tuple[str, list[str]]] = []
    too_short = too_long = blank = 0
    for line in text.splitlines():
        words = tokenize(line)
        if not words:
            blank += 1
        elif len(words) < min_words:
            too_short += 1
        elif len(words) > max_words:
            too_long += 1
        else:
            kept.append((line.strip(), words))
    if limit is not None:
        kept = kept[:limit]
    stats = {"kept": len(kept), "too_short": too_short, "too_long": too_long, "blank": blank}
    if not kept:
        raise IngestionError(f"no usable sentences in corpus: {stats}")
    order = np.random.default_rng(seed).permutation(len(kept))
    n_test = int(round(len(kept) * split_ratio))
    test_idx, train_idx = order[:n_test], order[n_test:]
    vocab = Vocab.build(kept[i][1] for i in train_idx)

    def make(i):
        raw, words = kept[i]
        return Sentence(vocab.encode(words), raw)

    return Corpus(
        train=[make(i) for i in train_idx],
        test=[make(i) for i in test_idx],
        split_ratio=split_ratio,
        vocab=vocab,
        dropped=too_short + too_long + blank,
        stats=stats,
    )


# -- BLEU ---------------------------------------------------------------------
BLEU_EPS = 1e-9


def _as_tokens(s) -> list:
    if isinstance(s, Sentence):
        return list(s.tokens)
    return list(s)


def _ngram_counts(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_stats(cand: Sequence, ref: Sequence, max_n: int) -> tuple[list[int], list[int]]:
    matched, total = [], []
    for n in range(1, max_n + 1):
        c = _ngram_counts(cand, n)
        r = _ngram_counts(ref, n)
        matched.append(sum(min(k, r[g]) for g, k in c.items()))
        total.append(max(len(cand) - n + 1, 0))
    return matched, total


def _combine(matched, total, cand_len, ref_len, max_n, eps) -> float:
    if cand_len == 0:
        return 0.0
    log_p = 0.0
    for m, t in zip(matched, total):
        p = m / t if (t and m) else eps
        log_p += math.log(p) / max_n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(log_p)


def bleu(candidate, reference, max_n: int = 4, eps: float = BLEU_EPS) -> float:
    """Sentence BLEU with uniform weights, brevity penalty and add-eps smoothing.

    Zero (or undefined, for too-short candidates) n-gram precisions are
    replaced by ``eps`` so that a short sentence with no 4-gram match is
    scored tiny rather than exactly zero. An empty candidate scores 0.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    if not ref:
        raise ValueError("reference must be non-empty")
    matched, total = _clipped_stats(cand, ref, max_n)
    return _combine(matched, total, len(cand), len(ref), max_n, eps)


def corpus_bleu(candidates, references, max_n: int = 4, eps: float = BLEU_EPS) -> float:
    """Corpus BLEU: n-gram counts and lengths pooled over all sentence pairs."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    matched = [0] * max_n
    total = [0] * max_n
    c_len = r_len = 0
    for cand, ref in zip(candidates, references):
        cand, ref = _as_tokens(cand), _as_tokens(ref)
        m, t = _clipped_stats(cand, ref, max_n)
        matched = [a + b for a, b in zip(matched, m)]
        total = [a + b for a, b in zip(total, t)]
        c_len += len(cand)
        r_len += len(ref)
    return _combine(matched, total, c_len, r_len, max_n, eps)


def mean_sentence_bleu(candidates, references, max_n: int = 4, eps: float = BLEU_EPS) -> float:
    scores = [bleu(c, r, max_n, eps) for c, r in zip(candidates, references)]
    return float(np.mean(scores)) if scores else 0.0
