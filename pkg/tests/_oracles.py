"""Slow, obviously-correct reference implementations used by the tests."""
import math
from functools import lru_cache


def edit_distance_rec(a, b):
    """Levenshtein distance by the textbook recursion (no table)."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


class SentenceHmmOracle:
    """Sentence HMM written directly from the topology rules.

    States are (word, position).  From position i: loop to i, advance to i+1,
    skip to i+2; moving past the last position exits the word.  Entering a
    word lands on position 0 or 1; entering a one-grapheme word at 1 passes
    straight on to the next word.  Leaving the last word ends the sentence.
    """

    END = "end"

    def __init__(self, words, topology):
        self.words = [list(w) for w in words]
        self.t = topology
        self.states = [(w, i) for w, word in enumerate(self.words) for i in range(len(word))]
        self.index = {s: n for n, s in enumerate(self.states)}

    @staticmethod
    def _add(out, dist, scale):
        for k, v in dist.items():
            out[k] = out.get(k, 0.0) + scale * v

    def entry(self, w):
        if w == len(self.words):
            return {self.END: 1.0}
        out = {(w, 0): self.t.enter0}
        if len(self.words[w]) >= 2:
            out[(w, 1)] = out.get((w, 1), 0.0) + self.t.enter1
        else:
            self._add(out, self.entry(w + 1), self.t.enter1)
        return out

    def step(self, state):
        w, i = state
        L = len(self.words[w])
        out = {state: self.t.a_loop}
        for j, p in ((i + 1, self.t.a_adv), (i + 2, self.t.a_skip)):
            if j < L:
                out[(w, j)] = out.get((w, j), 0.0) + p
            else:
                self._add(out, self.entry(w + 1), p)
        return out

    def paths(self, n_phones):
        """Every state sequence of the given length with non-zero transition mass."""
        def extend(prefix):
            if len(prefix) == n_phones:
                if self.step(prefix[-1]).get(self.END, 0.0) > 0:
                    yield list(prefix)
                return
            succ = self.entry(0) if not prefix else self.step(prefix[-1])
            for s, p in succ.items():
                if s != self.END and p > 0:
                    yield from extend(prefix + [s])

        if n_phones == 0:
            return
        yield from extend([])

    def score(self, path, phones, emission):
        """Log probability of one state path; ``emission(grapheme, phone)``."""
        lp = 0.0
        prev = None
        for s, ph in zip(path, phones):
            p = (self.entry(0) if prev is None else self.step(prev)).get(s, 0.0)
            e = emission(self.words[s[0]][s[1]], ph)
            if p <= 0 or e <= 0:
                return -math.inf
            lp += math.log(p) + math.log(e)
            prev = s
        p = self.step(prev).get(self.END, 0.0)
        return lp + math.log(p) if p > 0 else -math.inf

    def best(self, phones, emission):
        return max((self.score(p, phones, emission) for p in self.paths(len(phones))), default=-math.inf)

    def loglik(self, phones, emission):
        total = 0.0
        for p in self.paths(len(phones)):
            s = self.score(p, phones, emission)
            if s > -math.inf:
                total += math.exp(s)
        return math.log(total) if total > 0 else -math.inf
