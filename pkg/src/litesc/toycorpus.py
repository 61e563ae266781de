"""Deterministic generator for the bundled toy corpus.

A small probabilistic grammar in the register of parliamentary proceedings.
The bundled ``data/toy_corpus.txt`` is ``generate(10500, seed=2021)`` written
one sentence per line; a handful of two- and three-word interjections are
mixed in so length filtering has something to drop.
"""

from __future__ import annotations

import numpy as np

DET = ["the", "this", "that", "every", "our", "their", "a"]
ADJ = [
    "european", "national", "important", "new", "common", "social", "economic",
    "difficult", "clear", "serious", "public", "financial", "political", "small",
    "large", "final", "current", "fair", "open", "strong",
]
NOUN = [
    "commission", "council", "parliament", "report", "proposal", "agreement",
    "member", "president", "committee", "directive", "budget", "market",
    "policy", "question", "debate", "country", "citizen", "union", "treaty",
    "amendment", "programme", "situation", "government", "right", "problem",
    "sector", "region", "system", "decision", "resolution", "initiative",
    "measure", "framework", "principle", "minister", "group", "area", "level",
    "fund", "crisis", "industry", "worker", "farmer", "energy", "environment",
    "health", "security", "trade", "development", "future",
]
VERB_PAST = [
    "adopted", "rejected", "supported", "presented", "discussed", "approved",
    "proposed", "welcomed", "examined", "ignored", "improved", "changed",
    "defended", "criticised", "accepted", "delayed",
]
VERB_INF = [
    "adopt", "reject", "support", "present", "discuss", "approve", "propose",
    "welcome", "examine", "improve", "change", "defend", "protect", "strengthen",
    "review", "finance", "reform", "respect",
]
MODAL = ["must", "should", "will", "can", "cannot", "would", "may"]
SUBJ_PRON = ["we", "i", "they", "you", "it"]
PREP = ["of", "in", "for", "on", "with", "by", "from", "to", "between", "within"]
CONJ = ["and", "but", "because", "while", "although", "so"]
ADV = ["also", "now", "therefore", "clearly", "already", "still", "finally", "today"]
OPENERS = [
    ["mr", "president"],
    ["madam", "president"],
    ["ladies", "and", "gentlemen"],
    ["in", "my", "opinion"],
    ["first", "of", "all"],
    ["on", "behalf", "of", "my", "group"],
]
INTERJECTIONS = [
    "thank you.", "i agree.", "applause", "very good.", "that is all.",
    "vote.", "no.", "quite right.",
]


class _Grammar:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def pick(self, words):
        return words[int(self.rng.integers(len(words)))]

    def chance(self, p: float) -> bool:
        return bool(self.rng.random() < p)

    def np_(self, depth: int = 0) -> list[str]:
        out = [self.pick(DET)]
        if self.chance(0.5):
            out.append(self.pick(ADJ))
        out.append(self.pick(NOUN))
        if depth < 1 and self.chance(0.3):
            out += [self.pick(PREP)] + self.np_(depth + 1)
        return out

    def subject(self) -> list[str]:
        return [self.pick(SUBJ_PRON)] if self.chance(0.35) else self.np_()

    def vp(self) -> list[str]:
        if self.chance(0.5):
            out = [self.pick(MODAL)]
            if self.chance(0.25):
                out.append(self.pick(ADV))
            out += [self.pick(VERB_INF)] + self.np_()
        else:
            out = ([self.pick(ADV)] if self.chance(0.2) else []) + [self.pick(VERB_PAST)] + self.np_()
        if self.chance(0.3):
            out += [self.pick(PREP)] + self.np_(1)
        return out

    def clause(self) -> list[str]:
        return self.subject() + self.vp()

    def sentence(self) -> str:
        words: list[str] = []
        if self.chance(0.2):
            words += self.pick(OPENERS) + [","]
        words += self.clause()
        if self.chance(0.3):
            words += [self.pick(CONJ)] + self.clause()
        text = " ".join(words).replace(" ,", ",")
        return text[0].upper() + text[1:] + "."


def generate(n: int, seed: int = 2021, interjection_rate: float = 0.02) -> list[str]:
    """Return ``n`` lines of toy text."""
    rng = np.random.default_rng(seed)
    g = _Grammar(rng)
    lines = []
    for _ in range(n):
        if rng.random() < interjection_rate:
            lines.append(g.pick(INTERJECTIONS).capitalize())
        else:
            lines.append(g.sentence())
    return lines


def vocabulary_size() -> int:
    words = set(DET + ADJ + NOUN + VERB_PAST + VERB_INF + MODAL + SUBJ_PRON + PREP + CONJ + ADV)
    for o in OPENERS:
        words.update(o)
    return len(words)
