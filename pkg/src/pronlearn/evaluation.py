"""Phone/word error rates and better/worse/same dictionary comparison."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Sequence

from .core import Lexicon


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


@dataclass
class EvalReport:
    per: float
    wer: float
    num_words: int
    total_ref_phones: int
    total_edits: int
    word_errors: int
    missing: int = 0

    def as_dict(self) -> Dict:
        return asdict(self)


@dataclass
class CompareReport:
    num_words: int
    better: int
    worse: int
    same: int

    def pct(self, n: int) -> float:
        return 100.0 * n / self.num_words if self.num_words else 0.0

    def as_dict(self) -> Dict:
        d = asdict(self)
        d.update(better_pct=self.pct(self.better), worse_pct=self.pct(self.worse), same_pct=self.pct(self.same))
        return d


def _single_pron(ref: Lexicon, word: str):
    variants = ref.variants(word)
    if len(variants) != 1:
        raise ValueError(f"reference word {word!r} has {len(variants)} pronunciations; expected exactly one")
    return variants[0].pron


def evaluate_lexicon(hyp: Lexicon, ref: Lexicon, missing_policy: str = "skip") -> EvalReport:
    """Corpus-level PER (edits / reference phones) and WER over reference words.

    Words absent from ``hyp`` are skipped or scored as fully deleted.
    """
    if missing_policy not in ("skip", "all_deleted"):
        raise ValueError(f"unknown missing_policy {missing_policy!r}")
    n_words = edits = ref_phones = errors = missing = 0
    for word in ref.words():
        r = _single_pron(ref, word)
        if word in hyp:
            d = edit_distance(hyp.pron(word), r)
        elif missing_policy == "all_deleted":
            d = len(r)
            missing += 1
        else:
            missing += 1
            continue
        n_words += 1
        ref_phones += len(r)
        edits += d
        errors += d > 0
    per = edits / ref_phones if ref_phones else 0.0
    wer = errors / n_words if n_words else 0.0
    return EvalReport(per, wer, n_words, ref_phones, edits, errors, missing)


def compare_dictionaries(a: Lexicon, b: Lexicon, ref: Lexicon) -> CompareReport:
    """Count words where ``a`` is closer to / farther from / as close to ``ref`` as ``b``."""
    words = [w for w in ref.words() if w in a and w in b]
    if not words:
        raise ValueError("dictionaries share no words with the reference")
    better = worse = same = 0
    for w in words:
        r = _single_pron(ref, w)
        da = edit_distance(a.pron(w), r)
        db = edit_distance(b.pron(w), r)
        if da < db:
            better += 1
        elif da > db:
            worse += 1
        else:
            same += 1
    return CompareReport(len(words), better, worse, same)


def relative_reduction(baseline: float, value: float) -> float:
    """(baseline - value) / baseline; positive when ``value`` improves on the baseline."""
    if baseline == 0:
        return 0.0
    return (baseline - value) / baseline
