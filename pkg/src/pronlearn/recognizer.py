"""Simulated phone recognizer: a seeded noisy channel plus phone-LM candidate selection.

Each sentence draws its randomness from a counter-based generator keyed by
``(seed, sentence index)``, so decoding order never changes the output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import Corpus, Pronunciation, Sentence
from .phonelm import PhoneLm, logprob


@dataclass
class NoiseModel:
    phonemes: Sequence[str]
    p_sub: float = 0.08
    p_ins: float = 0.02
    p_del: float = 0.02
    seed: int = 0
    confusion: Optional[Dict[str, Dict[str, float]]] = None
    _rows: Dict[str, tuple] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.phonemes = tuple(sorted(set(self.phonemes)))
        for name in ("p_sub", "p_ins", "p_del"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.p_sub + self.p_del > 1.0:
            raise ValueError("p_sub + p_del must be <= 1")
        if (self.p_sub > 0 or self.p_ins > 0) and not self.phonemes:
            raise ValueError("substitution and insertion need a phoneme inventory")
        if self.confusion is not None:
            for src, row in self.confusion.items():
                if abs(sum(row.values()) - 1.0) > 1e-9:
                    raise ValueError(f"confusion row for {src!r} does not sum to 1")

    def confusion_row(self, phone: str):
        """(targets, cumulative probabilities) used when ``phone`` is substituted."""
        row = self._rows.get(phone)
        if row is None:
            if self.confusion is not None and phone in self.confusion:
                items = sorted(self.confusion[phone].items())
                targets = [t for t, _ in items]
                probs = np.array([p for _, p in items], dtype=float)
            else:
                targets = [p for p in self.phonemes if p != phone] or [phone]
                probs = np.full(len(targets), 1.0 / len(targets))
            row = (targets, np.cumsum(probs))
            self._rows[phone] = row
        return row


@dataclass
class DecodeConfig:
    lm: PhoneLm
    n_candidates: int = 4

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")


def sentence_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def corrupt(nm: NoiseModel, gold: Sequence[str], rng: np.random.Generator) -> Pronunciation:
    """Delete w.p. p_del, else substitute w.p. p_sub; insert in each of the len+1 gaps w.p. p_ins."""
    n = len(gold)
    u = rng.random(n)
    pick = rng.random(n)
    ins = rng.random(n + 1)
    ins_pick = rng.integers(0, max(1, len(nm.phonemes)), n + 1)
    out: List[str] = []
    for i in range(n + 1):
        if ins[i] < nm.p_ins:
            out.append(nm.phonemes[ins_pick[i]])
        if i == n:
            break
        if u[i] < nm.p_del:
            continue
        if u[i] < nm.p_del + nm.p_sub:
            targets, cum = nm.confusion_row(gold[i])
            k = min(int(np.searchsorted(cum, pick[i] * cum[-1], side="right")), len(targets) - 1)
            out.append(targets[k])
        else:
            out.append(gold[i])
    return tuple(out)


def decode_sentence(nm: NoiseModel, cfg: DecodeConfig, gold: Sequence[str], rng: np.random.Generator) -> Pronunciation:
    """Best of ``n_candidates`` channel draws under the phone LM; ties keep the first draw."""
    best, best_lp = None, -np.inf
    for _ in range(cfg.n_candidates):
        cand = corrupt(nm, gold, rng)
        if cfg.n_candidates == 1:
            return cand
        lp = logprob(cfg.lm, cand)
        if best is None or lp > best_lp:
            best, best_lp = cand, lp
    return best


def decode_corpus(nm: NoiseModel, cfg: DecodeConfig, corpus: Corpus) -> Corpus:
    out = []
    for idx, s in enumerate(corpus.sentences):
        if s.phones is None:
            raise ValueError(f"sentence {idx} has no gold phones to decode")
        out.append(Sentence(s.words, decode_sentence(nm, cfg, s.phones, sentence_rng(nm.seed, idx))))
    return Corpus(corpus.language_tag, out)
