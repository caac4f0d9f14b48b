"""Interpolated Witten-Bell n-gram counts shared by the graphone and phone models."""
from __future__ import annotations

import math
from typing import Callable, Dict, Hashable, Iterable, List, Sequence, Tuple

Token = Hashable


class WittenBellNgram:
    """Weighted n-gram counts with interpolated Witten-Bell estimates.

    ``P(w|h) = (c(h,w) + T(h) P(w|h')) / (c(h) + T(h))`` where ``T(h)`` is the
    number of distinct continuations of ``h`` and ``h'`` drops the oldest
    token.  The recursion bottoms out in a uniform distribution over the
    observed vocabulary plus one unknown-token slot, so every distribution
    (including the unknown mass) sums to one.
    """

    def __init__(self, order: int):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        # counts[L][history of length L][token]
        self.counts: List[Dict[Tuple, Dict[Token, float]]] = [dict() for _ in range(order)]
        self.vocab: set = set()
        self._totals: List[Dict[Tuple, Tuple[float, int]]] = []
        self._cache: Dict[Tuple, float] = {}

    def add_sequence(self, tokens: Sequence[Token], weight: float = 1.0) -> None:
        """Count every token after the first; the first token is context only."""
        if weight <= 0:
            raise ValueError("weight must be positive")
        for i in range(1, len(tokens)):
            tok = tokens[i]
            self.vocab.add(tok)
            for L in range(0, min(self.order - 1, i) + 1):
                hist = tuple(tokens[i - L:i])
                node = self.counts[L].setdefault(hist, {})
                node[tok] = node.get(tok, 0.0) + weight
        self._totals = []
        self._cache.clear()

    def add_count(self, hist: Tuple, tok: Token, count: float) -> None:
        node = self.counts[len(hist)].setdefault(tuple(hist), {})
        node[tok] = node.get(tok, 0.0) + count
        self.vocab.add(tok)
        self._totals = []
        self._cache.clear()

    def _ensure_totals(self) -> None:
        if self._totals:
            return
        self._totals = [
            {h: (sum(node.values()), len(node)) for h, node in level.items()} for level in self.counts
        ]

    @property
    def vocab_size(self) -> int:
        """Observed vocabulary plus the unknown-token slot."""
        return len(self.vocab) + 1

    def prob(self, tok: Token, hist: Tuple) -> float:
        if len(hist) > self.order - 1:
            hist = hist[len(hist) - self.order + 1:]
        key = (tok, hist)
        p = self._cache.get(key)
        if p is not None:
            return p
        self._ensure_totals()
        L = len(hist)
        if L == 0:
            total = self._totals[0].get(())
            base = 1.0 / self.vocab_size
            if total is None:
                p = base
            else:
                c, t = total
                p = (self.counts[0][()].get(tok, 0.0) + t * base) / (c + t)
        else:
            lower = self.prob(tok, hist[1:])
            total = self._totals[L].get(hist)
            if total is None:
                p = lower
            else:
                c, t = total
                p = (self.counts[L][hist].get(tok, 0.0) + t * lower) / (c + t)
        self._cache[key] = p
        return p

    def logprob(self, tok: Token, hist: Tuple) -> float:
        return math.log(self.prob(tok, hist))

    def clear_cache(self) -> None:
        self._cache.clear()

    def histories(self) -> Iterable[Tuple]:
        for level in self.counts:
            yield from level.keys()

    def to_lines(self, fmt: Callable[[Token], str]) -> List[str]:
        rows = []
        for L, level in enumerate(self.counts):
            for hist, node in level.items():
                h = " ".join(fmt(t) for t in hist)
                for tok, c in node.items():
                    rows.append((L, h, fmt(tok), repr(c)))
        rows.sort()
        return [f"{L}\t{h}\t{t}\t{c}" for L, h, t, c in rows]

    @classmethod
    def from_lines(cls, order: int, lines: Iterable[str], parse: Callable[[str], Token]) -> "WittenBellNgram":
        lm = cls(order)
        for line in lines:
            L, h, t, c = line.split("\t")
            hist = tuple(parse(x) for x in h.split(" ")) if h else ()
            if len(hist) != int(L) or int(L) >= order:
                raise ValueError(f"bad n-gram row {line!r}")
            lm.counts[int(L)].setdefault(hist, {})[parse(t)] = float(c)
            lm.vocab.add(parse(t))
        return lm
