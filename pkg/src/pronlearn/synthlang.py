"""Synthetic languages with known grapheme-to-phoneme rules.

A language is a set of rewrite rules (single graphemes and digraphs mapped to
0-2 phonemes, applied leftmost-longest), a vocabulary of random grapheme
strings whose gold pronunciations follow the rules except for a seeded
irregular fraction, and a Zipf-distributed corpus whose sentence phones are the
concatenated gold pronunciations.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Corpus, Lexicon, LexEntry, Pronunciation, Sentence, write_corpus, write_lexicon, write_text

GRAPHEME_POOL = "abcdefghijklmnopqrstuvwxyz" + "αβγδεζηθικλμνξπρστυφχψω"
PHONEME_POOL = ("p b t d k g f v s z S Z x h m n N l r j w a e i o u @ E O I U V { A Q y 2 9").split()

Rules = Dict[Tuple[str, ...], Pronunciation]


@dataclass
class SynthSpec:
    n_graphemes: int = 20
    n_phonemes: int = 24
    n_digraph_rules: int = 5
    irregularity_rate: float = 0.05
    vocab_size: int = 2000
    zipf_exponent: float = 1.1
    sentence_length: Tuple[int, int] = (3, 10)
    n_sentences: int = 20000
    seed: int = 0
    word_length: Tuple[int, int] = (2, 8)
    silent_rate: float = 0.05
    double_rate: float = 0.0
    language_tag: str = "syn"

    def validate(self) -> None:
        if min(self.n_graphemes, self.n_phonemes, self.vocab_size, self.n_sentences) < 1:
            raise ValueError("inventory, vocabulary and corpus sizes must be >= 1")
        if self.n_digraph_rules < 0 or self.n_digraph_rules > self.n_graphemes ** 2:
            raise ValueError("n_digraph_rules must be in [0, n_graphemes^2]")
        if not 0.0 <= self.irregularity_rate < 1.0:
            raise ValueError("irregularity_rate must be in [0, 1)")
        lo, hi = self.sentence_length
        if not 1 <= lo <= hi:
            raise ValueError("bad sentence_length range")
        lo, hi = self.word_length
        if not 1 <= lo <= hi:
            raise ValueError("bad word_length range")
        if self.n_graphemes > len(GRAPHEME_POOL):
            raise ValueError(f"at most {len(GRAPHEME_POOL)} graphemes supported")
        if self.n_graphemes ** self.word_length[1] < self.vocab_size:
            raise ValueError("vocabulary larger than the space of possible words")


@dataclass
class SynthLanguage:
    spec: SynthSpec
    rules: Rules
    gold: Lexicon
    corpus: Corpus
    irregular: List[str] = field(default_factory=list)

    @property
    def graphemes(self) -> List[str]:
        return sorted({g for key in self.rules for g in key})

    @property
    def phonemes(self) -> List[str]:
        return phoneme_inventory(self.spec.n_phonemes)


def phoneme_inventory(n: int) -> List[str]:
    pool = list(PHONEME_POOL)
    pool += [f"P{i}" for i in range(len(pool), n)]
    return pool[:n]


def apply_rules(rules: Rules, word: str) -> Pronunciation:
    """Leftmost-longest rewrite of ``word``."""
    out: List[str] = []
    i = 0
    while i < len(word):
        pair = tuple(word[i:i + 2])
        if len(pair) == 2 and pair in rules:
            out.extend(rules[pair])
            i += 2
        else:
            out.extend(rules[(word[i],)])
            i += 1
    return tuple(out)


def _segments(rules: Rules, word: str) -> List[Tuple[int, int]]:
    """(graphemes, phonemes) per rule application, leftmost-longest."""
    out = []
    i = 0
    while i < len(word):
        pair = tuple(word[i:i + 2])
        if len(pair) == 2 and pair in rules:
            out.append((2, len(rules[pair])))
            i += 2
        else:
            out.append((1, len(rules[(word[i],)])))
            i += 1
    return out


def alignable(rules: Rules, word: str) -> bool:
    """Whether the regular pronunciation fits a one-state-per-grapheme HMM
    whose skips pass over a single state: no two adjacent graphemes may both
    stay silent.
    """
    # reachable values of "previous grapheme emitted nothing"
    prev_silent = {False}
    for n_g, n_p in _segments(rules, word):
        if n_g == 1:
            splits = [(n_p,)]
        else:
            splits = [(a, n_p - a) for a in range(n_p + 1)]
        nxt = set()
        for ps in prev_silent:
            for split in splits:
                silent = ps
                ok = True
                for c in split:
                    if c == 0 and silent:
                        ok = False
                        break
                    silent = c == 0
                if ok:
                    nxt.add(silent)
        if not nxt:
            return False
        prev_silent = nxt
    return True


def _make_rules(spec: SynthSpec, rng: np.random.Generator) -> Rules:
    gs = list(GRAPHEME_POOL[:spec.n_graphemes])
    phones = phoneme_inventory(spec.n_phonemes)
    order = [phones[i] for i in rng.permutation(len(phones))]
    g_order = [gs[i] for i in rng.permutation(len(gs))]
    n_silent = int(round(spec.silent_rate * len(gs)))
    n_silent = min(n_silent, len(gs) - 1)
    rules: Rules = {}
    used = 0
    for g in g_order[:n_silent]:
        rules[(g,)] = ()
    for g in g_order[n_silent:]:
        rules[(g,)] = (order[used % len(order)],)
        used += 1
    spare = order[used:] if used < len(order) else list(order)
    spare_i = 0

    def next_spare() -> str:
        nonlocal spare_i
        p = spare[spare_i % len(spare)]
        spare_i += 1
        return p

    voiced = g_order[n_silent:]
    n_double = int(round(spec.double_rate * len(gs)))
    for g in voiced[:n_double]:
        rules[(g,)] = rules[(g,)] + (next_spare(),)
    pairs = [(a, b) for a in gs for b in gs]
    picks = rng.choice(len(pairs), size=spec.n_digraph_rules, replace=False) if spec.n_digraph_rules else []
    for idx in sorted(int(i) for i in picks):
        a, b = pairs[idx]
        out = (next_spare(),) if rng.random() < 0.7 else (next_spare(), next_spare())
        if out == rules[(a,)] + rules[(b,)]:
            out = (next_spare(),)
        rules[(a, b)] = out
    return rules


def _irregular_pron(regular: Pronunciation, word: str, phones: Sequence[str], rng: np.random.Generator) -> Pronunciation:
    for _ in range(100):
        n = max(1, len(word) // 2, len(regular) + int(rng.integers(-1, 2)))
        n = min(n, 2 * len(word))
        pron = tuple(phones[int(i)] for i in rng.integers(0, len(phones), n))
        if pron != regular:
            return pron
    raise RuntimeError("could not draw an irregular pronunciation")


def zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = np.arange(1, n + 1, dtype=float) ** -exponent
    return w / w.sum()


def generate_language(spec: SynthSpec) -> SynthLanguage:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    rules = _make_rules(spec, rng)
    gs = list(GRAPHEME_POOL[:spec.n_graphemes])
    phones = phoneme_inventory(spec.n_phonemes)

    words: List[str] = []
    seen = set()
    lo, hi = spec.word_length
    while len(words) < spec.vocab_size:
        n = int(rng.integers(lo, hi + 1))
        w = "".join(gs[int(i)] for i in rng.integers(0, len(gs), n))
        if w in seen or not apply_rules(rules, w) or not alignable(rules, w):
            continue
        seen.add(w)
        words.append(w)

    gold = Lexicon()
    irregular = []
    prons: Dict[str, Pronunciation] = {}
    irregular_draw = rng.random(len(words))
    for w, u in zip(words, irregular_draw):
        pron = apply_rules(rules, w)
        if u < spec.irregularity_rate:
            pron = _irregular_pron(pron, w, phones, rng)
            irregular.append(w)
        prons[w] = pron
        gold.add(w, LexEntry(pron))

    probs = zipf_weights(len(words), spec.zipf_exponent)
    slo, shi = spec.sentence_length
    lengths = rng.integers(slo, shi + 1, spec.n_sentences)
    draws = rng.choice(len(words), size=int(lengths.sum()), p=probs)
    sentences = []
    pos = 0
    for L in lengths:
        ws = tuple(words[int(i)] for i in draws[pos:pos + L])
        pos += L
        sentences.append(Sentence(ws, tuple(p for w in ws for p in prons[w])))
    corpus = Corpus(spec.language_tag, sentences)
    return SynthLanguage(spec, rules, gold, corpus, sorted(irregular))


def frequency_order(gold: Lexicon, corpus: Corpus) -> List[str]:
    """Lexicon words by descending corpus count, ties in byte order."""
    counts = corpus.word_counts()
    return sorted(gold.words(), key=lambda w: (-counts.get(w, 0), w.encode("utf-8")))


@dataclass
class SeedSplit:
    seeds: Dict[int, Lexicon]
    test: Lexicon


def split_lexicon(gold: Lexicon, corpus: Corpus, sizes: Sequence[int], test_fraction: float = 0.2,
                  seed: int = 0) -> SeedSplit:
    """Nested most-frequent seed sets plus a held-out test set.

    The test set is a seeded ``test_fraction`` sample (at least one word) of
    the words outside the largest seed set.
    """
    if not sizes:
        raise ValueError("need at least one seed size")
    if any(s < 1 for s in sizes):
        raise ValueError("seed sizes must be >= 1")
    ranked = frequency_order(gold, corpus)
    largest = max(sizes)
    if largest > len(ranked):
        raise ValueError(f"seed size {largest} exceeds vocabulary of {len(ranked)} words")
    rest = ranked[largest:]
    if not rest:
        raise ValueError("no words left for the test set")
    rng = np.random.default_rng([seed, 7919])
    n_test = max(1, int(round(test_fraction * len(rest))))
    pool = sorted(rest, key=lambda w: w.encode("utf-8"))
    test_words = [pool[int(i)] for i in rng.choice(len(pool), size=n_test, replace=False)]
    seeds = {s: gold.subset(ranked[:s]) for s in sorted(set(sizes))}
    return SeedSplit(seeds, gold.subset(test_words))


def split_seed(lang: SynthLanguage, sizes: Sequence[int], test_fraction: float = 0.2) -> SeedSplit:
    return split_lexicon(lang.gold, lang.corpus, sizes, test_fraction, lang.spec.seed)


def format_rules(rules: Rules) -> str:
    rows = sorted((" ".join(k), " ".join(v)) for k, v in rules.items())
    return "#rules v1\n" + "".join(f"{k}\t{v}\n" for k, v in rows)


def parse_rules(text: str) -> Rules:
    lines = text.split("\n")
    if lines[0] != "#rules v1":
        raise ValueError("expected '#rules v1' header")
    rules: Rules = {}
    for line in lines[1:]:
        if not line:
            continue
        k, v = line.split("\t")
        rules[tuple(k.split(" "))] = tuple(v.split(" ")) if v else ()
    return rules


def write_language(lang: SynthLanguage, outdir: str | os.PathLike) -> Dict[str, str]:
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "gold": os.path.join(outdir, "gold.lex"),
        "corpus": os.path.join(outdir, "corpus.txt"),
        "rules": os.path.join(outdir, "rules.txt"),
        "irregular": os.path.join(outdir, "irregular.txt"),
    }
    write_lexicon(lang.gold, paths["gold"])
    write_corpus(lang.corpus, paths["corpus"])
    write_text(paths["rules"], format_rules(lang.rules))
    write_text(paths["irregular"], "".join(w + "\n" for w in lang.irregular))
    return paths


def spec_dict(spec: SynthSpec) -> Dict:
    return asdict(spec)
