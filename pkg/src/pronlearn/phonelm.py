"""Phone-level n-gram language model (Witten-Bell, sentence boundary markers)."""
from __future__ import annotations

import math
import os
from typing import Iterable, List, Sequence

from .core import FormatError, write_text
from .ngram import WittenBellNgram

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
HEADER = "#phonelm v1"
_CACHE_LIMIT = 1_000_000


class PhoneLm:
    """Phone n-gram model; unseen phonemes share the unknown-token mass."""

    def __init__(self, ngram: WittenBellNgram):
        self.ngram = ngram
        self._lp: dict = {}

    @property
    def order(self) -> int:
        return self.ngram.order

    @property
    def vocabulary(self) -> List[str]:
        return sorted(self.ngram.vocab)

    def _tok(self, p: str) -> str:
        return p if p in self.ngram.vocab else UNK

    def cond_prob(self, phone: str, history: Sequence[str] = ()) -> float:
        hist = tuple(self._tok(p) if p != BOS else p for p in history)
        return self.ngram.prob(self._tok(phone) if phone != EOS else EOS, hist)

    def token_logprobs(self, seq: Sequence[str]) -> List[float]:
        vocab = self.ngram.vocab
        toks = (BOS,) + tuple(p if p in vocab else UNK for p in seq) + (EOS,)
        n = self.ngram.order
        cache = self._lp
        if len(cache) > _CACHE_LIMIT:
            cache.clear()
            self.ngram.clear_cache()
        out = []
        for i in range(1, len(toks)):
            key = toks[max(0, i - n + 1):i + 1]
            lp = cache.get(key)
            if lp is None:
                lp = cache[key] = math.log(self.ngram.prob(toks[i], key[:-1]))
            out.append(lp)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhoneLm):
            return NotImplemented
        return format_lm(self) == format_lm(other)


def train_lm(sequences: Iterable[Sequence[str]], order: int = 5) -> PhoneLm:
    if not 1 <= order <= 7:
        raise ValueError("order must be in [1, 7]")
    ngram = WittenBellNgram(order)
    n = 0
    for seq in sequences:
        for p in seq:
            if p in (BOS, EOS, UNK):
                raise ValueError(f"reserved symbol {p!r} in training data")
        ngram.add_sequence([BOS, *seq, EOS])
        n += 1
    if n == 0:
        raise ValueError("cannot train a phone LM on no sequences")
    return PhoneLm(ngram)


def logprob(lm: PhoneLm, seq: Sequence[str]) -> float:
    """Natural-log probability of ``seq`` including the end marker."""
    return sum(lm.token_logprobs(seq))


def perplexity(lm: PhoneLm, sequences: Iterable[Sequence[str]]) -> float:
    total, ntok = 0.0, 0
    for seq in sequences:
        lps = lm.token_logprobs(seq)
        total += sum(lps)
        ntok += len(lps)
    if ntok == 0:
        raise ValueError("perplexity needs at least one sequence")
    return math.exp(-total / ntok)


def format_lm(lm: PhoneLm) -> str:
    lines = [HEADER, f"order\t{lm.order}", "[counts]"]
    lines += lm.ngram.to_lines(str)
    return "\n".join(lines) + "\n"


def parse_lm(text: str, path=None) -> PhoneLm:
    lines = text.rstrip("\n").split("\n")
    if not lines or lines[0] != HEADER:
        raise FormatError(f"expected {HEADER!r} header", path, 1)
    try:
        key, val = lines[1].split("\t")
        assert key == "order" and lines[2] == "[counts]"
        return PhoneLm(WittenBellNgram.from_lines(int(val), lines[3:], str))
    except (ValueError, AssertionError, IndexError) as exc:
        raise FormatError(f"malformed phone LM: {exc}", path) from None


def save_lm(lm: PhoneLm, path: str | os.PathLike) -> None:
    write_text(path, format_lm(lm))


def load_lm(path: str | os.PathLike) -> PhoneLm:
    with open(path, encoding="utf-8") as f:
        return parse_lm(f.read(), str(path))
