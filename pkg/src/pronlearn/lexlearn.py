"""Lexicon learning: word-boundary discovery in decoded phone streams.

Every word becomes a left-to-right HMM with one state per grapheme, self
loops, single-step advances and skips over exactly one state.  Emission
distributions are tied per grapheme.  Word HMMs are chained into a sentence
HMM in which a word's exit feeds the next word's entry (enter at position 0
or 1; entering a one-grapheme word at position 1 skips it entirely).
Emissions and the shared transition parameters are fitted by Baum-Welch,
then Viterbi alignment splits each decoded phone sequence into word spans.
"""
from __future__ import annotations

import logging
import os
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import _hmm
from .core import Corpus, FormatError, LexEntry, Lexicon, Pronunciation, graphemes, write_text
from .phonelm import PhoneLm, logprob

log = logging.getLogger(__name__)

FLOOR = 1e-6
ADVANCE, LOOP, SKIP = 0, 1, 2
# route component columns
C_LOOP, C_ADV, C_SKIP, C_E0, C_E1 = range(5)


class AlignmentError(ValueError):
    pass


def floor_normalize(counts: np.ndarray, floor: float = FLOOR) -> np.ndarray:
    """Maximise sum(c log p) subject to sum(p)=1 and p >= floor.

    The solution is ``p_i = max(floor, c_i / lam)`` with ``lam`` chosen so the
    vector sums to one.
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    if n * floor > 1.0:
        raise ValueError("floor too large for this many outcomes")
    fixed = np.zeros(n, dtype=bool)
    while True:
        free = ~fixed
        mass = 1.0 - floor * fixed.sum()
        denom = counts[free].sum()
        p = np.full(n, floor)
        if denom > 0:
            p[free] = counts[free] / denom * mass
        else:
            p[free] = mass / free.sum()
        newly = free & (p < floor)
        if not newly.any():
            return p
        fixed |= newly


@dataclass
class Topology:
    """Globally tied transition parameters."""

    a_loop: float = 0.10
    a_adv: float = 0.80
    a_skip: float = 0.10
    enter0: float = 0.9
    enter1: float = 0.1

    def __post_init__(self):
        for v in (self.a_loop, self.a_adv, self.a_skip, self.enter0, self.enter1):
            if v < 0:
                raise ValueError("transition parameters must be non-negative")
        if abs(self.a_loop + self.a_adv + self.a_skip - 1.0) > 1e-9:
            raise ValueError("a_loop + a_adv + a_skip must equal 1")
        if abs(self.enter0 + self.enter1 - 1.0) > 1e-9:
            raise ValueError("enter0 + enter1 must equal 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.a_loop, self.a_adv, self.a_skip, self.enter0, self.enter1])


class EmissionTable:
    """Per-grapheme categorical distributions over phonemes, shared by every state of that grapheme."""

    def __init__(self, graphemes_: Sequence[str], phonemes: Sequence[str], matrix: np.ndarray):
        self.graphemes = list(graphemes_)
        self.phonemes = list(phonemes)
        self.g_index = {g: i for i, g in enumerate(self.graphemes)}
        self.p_index = {p: i for i, p in enumerate(self.phonemes)}
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (len(self.graphemes), len(self.phonemes)):
            raise ValueError("emission matrix shape does not match inventories")

    def row(self, grapheme: str) -> np.ndarray:
        return self.matrix[self.g_index[grapheme]]

    def prob(self, grapheme: str, phoneme: str) -> float:
        return float(self.matrix[self.g_index[grapheme], self.p_index[phoneme]])

    def copy(self) -> "EmissionTable":
        return EmissionTable(self.graphemes, self.phonemes, self.matrix.copy())


def init_emissions(grapheme_inv: Sequence[str], phoneme_inv: Sequence[str]) -> EmissionTable:
    if not grapheme_inv or not phoneme_inv:
        raise ValueError("grapheme and phoneme inventories must be non-empty")
    g = sorted(set(grapheme_inv))
    p = sorted(set(phoneme_inv))
    return EmissionTable(g, p, np.full((len(g), len(p)), 1.0 / len(p)))


def sentence_routes(lengths: Sequence[int]):
    """All single-step routes of a sentence HMM.

    Returns rows ``(src, dst, n_loop, n_adv, n_skip, n_enter0, n_enter1, rank)``
    with ``src=-1`` for the start and ``dst=-1`` for the end.  A route that
    exits a word continues through the entry choice of the following word(s).
    """
    W = len(lengths)
    off = [0]
    for L in lengths:
        off.append(off[-1] + L)
    entries: List[List[Tuple[int, int, int]]] = [[] for _ in range(W + 1)]
    entries[W] = [(-1, 0, 0)]
    for w in range(W - 1, -1, -1):
        lst = [(off[w], 1, 0)]
        if lengths[w] >= 2:
            lst.append((off[w] + 1, 0, 1))
        else:
            lst += [(t, n0, n1 + 1) for t, n0, n1 in entries[w + 1]]
        entries[w] = lst
    rows = []
    for t, n0, n1 in entries[0]:
        rows.append((-1, t, 0, 0, 0, n0, n1, ADVANCE if n1 == 0 else SKIP))
    for w, L in enumerate(lengths):
        for i in range(L):
            s = off[w] + i
            rows.append((s, s, 1, 0, 0, 0, 0, LOOP))
            if i + 1 < L:
                rows.append((s, s + 1, 0, 1, 0, 0, 0, ADVANCE))
            else:
                for t, n0, n1 in entries[w + 1]:
                    rows.append((s, t, 0, 1, 0, n0, n1, ADVANCE if n1 == 0 else SKIP))
            if i + 2 < L:
                rows.append((s, s + 2, 0, 0, 1, 0, 0, SKIP))
            else:
                for t, n0, n1 in entries[w + 1]:
                    rows.append((s, t, 0, 0, 1, n0, n1, SKIP))
    return rows


class _Batch:
    """Flattened sentence HMMs for the numba kernels."""

    def __init__(self, sentences: Sequence[Tuple[Sequence[str], Sequence[str]]], table: EmissionTable):
        st_off, st_g, st_word = [0], [], []
        ph_off, ph = [0], []
        rt_off, routes, rt_mid = [0], [], []
        for words, phones in sentences:
            lengths = []
            for wi, word in enumerate(words):
                gs = graphemes(word)
                for g in gs:
                    try:
                        st_g.append(table.g_index[g])
                    except KeyError:
                        raise AlignmentError(f"grapheme {g!r} of {word!r} not in emission table") from None
                    st_word.append(wi)
                lengths.append(len(gs))
            for p in phones:
                try:
                    ph.append(table.p_index[p])
                except KeyError:
                    raise AlignmentError(f"phoneme {p!r} not in emission table") from None
            rows = sentence_routes(lengths)
            # start | internal | end
            rows.sort(key=lambda r: 0 if r[0] == -1 else (2 if r[1] == -1 else 1))
            first = len(routes)
            routes.extend(rows)
            n_start = sum(1 for r in rows if r[0] == -1)
            n_end = sum(1 for r in rows if r[1] == -1 and r[0] != -1)
            rt_mid += [first + n_start, first + len(rows) - n_end]
            st_off.append(len(st_g))
            ph_off.append(len(ph))
            rt_off.append(len(routes))
        self.n = len(sentences)
        self.st_off = np.array(st_off, dtype=np.int64)
        self.st_g = np.array(st_g, dtype=np.int64)
        self.st_word = np.array(st_word, dtype=np.int64)
        self.ph_off = np.array(ph_off, dtype=np.int64)
        self.ph = np.array(ph, dtype=np.int64)
        self.rt_off = np.array(rt_off, dtype=np.int64)
        self.rt_mid = np.array(rt_mid, dtype=np.int64)
        r = np.array(routes, dtype=np.int64).reshape(-1, 8)
        self.rt_src = np.ascontiguousarray(r[:, 0])
        self.rt_dst = np.ascontiguousarray(r[:, 1])
        self.rt_comp = np.ascontiguousarray(r[:, 2:7])
        self.rt_rank = np.ascontiguousarray(r[:, 7])
        self._sent_of_route = np.repeat(np.arange(self.n), np.diff(self.rt_off))

    def route_probs(self, topo: Topology) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logp = np.log(topo.as_array())
        comp = self.rt_comp.astype(float)
        # 0 * log(0) must count as 0
        terms = np.where(self.rt_comp > 0, comp * logp, 0.0)
        return np.exp(terms.sum(axis=1))

    def merged_edges(self, topo: Topology):
        """Parallel routes between the same state pair summed into one edge."""
        p = self.route_probs(topo)
        S = int(max(1, np.diff(self.st_off).max(initial=1))) + 2
        key = (self._sent_of_route * S + (self.rt_src + 1)) * S + (self.rt_dst + 1)
        uniq, first, inv = np.unique(key, return_index=True, return_inverse=True)
        prob = np.zeros(len(uniq))
        np.add.at(prob, inv, p)
        rank = np.full(len(uniq), 99, dtype=np.int64)
        np.minimum.at(rank, inv, self.rt_rank)
        sent = self._sent_of_route[first]
        ed_off = np.searchsorted(sent, np.arange(self.n + 1)).astype(np.int64)
        with np.errstate(divide="ignore"):
            logp = np.log(prob)
        return (ed_off, np.ascontiguousarray(self.rt_src[first]), np.ascontiguousarray(self.rt_dst[first]),
                logp, rank)

    def forward_backward(self, table: EmissionTable, topo: Topology, active: np.ndarray):
        return _hmm.forward_backward(self.st_off, self.st_g, self.ph_off, self.ph, self.rt_off, self.rt_mid,
                                     self.rt_src, self.rt_dst, self.route_probs(topo), self.rt_comp,
                                     table.matrix, active)

    def viterbi(self, table: EmissionTable, topo: Topology, active: np.ndarray):
        ed_off, src, dst, logp, rank = self.merged_edges(topo)
        with np.errstate(divide="ignore"):
            log_emis = np.log(table.matrix)
        return _hmm.viterbi(self.st_off, self.st_g, self.ph_off, self.ph, ed_off, src, dst, logp, rank,
                            log_emis, active)


class EmResult(NamedTuple):
    table: EmissionTable
    topology: Topology
    loglik: List[float]
    skipped: List[int]


def _corpus_pairs(corpus: Corpus):
    pairs = []
    for i, s in enumerate(corpus.sentences):
        if s.phones is None:
            raise ValueError(f"sentence {i} has no decoded phones")
        pairs.append((s.words, s.phones))
    return pairs


def em_train(corpus: Corpus, table: EmissionTable, topology: Optional[Topology] = None,
             max_iters: int = 30, tol: float = 1e-4, update_transitions: bool = True) -> EmResult:
    """Tied Baum-Welch over all sentences.

    Sentences no path can emit are skipped and listed in ``skipped``.  Stops
    when the total log-likelihood gains less than ``tol`` per sentence.
    """
    topology = topology or Topology()
    table = table.copy()
    if max_iters <= 0:
        return EmResult(table, topology, [], [])
    batch = _Batch(_corpus_pairs(corpus), table)
    active = np.ones(batch.n, dtype=np.bool_)
    trace: List[float] = []
    skipped: List[int] = []
    for it in range(max_iters):
        emis_counts, comp_counts, ll = batch.forward_backward(table, topology, active)
        if it == 0:
            bad = np.nonzero(~np.isfinite(ll))[0]
            if len(bad):
                skipped = bad.tolist()
                log.warning("%d of %d sentences cannot be emitted by any path; skipped", len(bad), batch.n)
                active[bad] = False
        total = float(ll[active].sum())
        if trace and total < trace[-1] - 1e-8 * max(1.0, abs(total)):
            log.warning("EM log-likelihood decreased: %r -> %r", trace[-1], total)
        trace.append(total)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol * max(1, int(active.sum())):
            break
        matrix = table.matrix.copy()
        for g in range(matrix.shape[0]):
            if emis_counts[g].sum() > 0:
                matrix[g] = floor_normalize(emis_counts[g])
        table = EmissionTable(table.graphemes, table.phonemes, matrix)
        if update_transitions:
            a = floor_normalize(comp_counts[:3]) if comp_counts[:3].sum() > 0 else topology.as_array()[:3]
            e = floor_normalize(comp_counts[3:]) if comp_counts[3:].sum() > 0 else topology.as_array()[3:]
            a, e = a / a.sum(), e / e.sum()
            topology = Topology(*(float(x) for x in a), *(float(x) for x in e))
    return EmResult(table, topology, trace, skipped)


Span = Tuple[str, Pronunciation]


def _spans(words, phones, path, st_off_local) -> List[Span]:
    word_of_state = []
    for wi, word in enumerate(words):
        word_of_state += [wi] * len(graphemes(word))
    spans: List[List[str]] = [[] for _ in words]
    for t, s in enumerate(path):
        spans[word_of_state[s]].append(phones[t])
    return [(w, tuple(sp)) for w, sp in zip(words, spans)]


def viterbi_path(words: Sequence[str], phones: Sequence[str], table: EmissionTable,
                 topology: Topology) -> Tuple[float, List[int]]:
    """(log score, state index per phone) of the best path."""
    if not words:
        raise ValueError("sentence must contain at least one word")
    batch = _Batch([(tuple(words), tuple(phones))], table)
    paths, scores = batch.viterbi(table, topology, np.ones(1, dtype=np.bool_))
    if not np.isfinite(scores[0]):
        raise AlignmentError(f"no legal path for {' '.join(words)!r} with {len(phones)} phones")
    return float(scores[0]), paths.tolist()


def viterbi_align(words: Sequence[str], phones: Sequence[str], table: EmissionTable,
                  topology: Optional[Topology] = None) -> List[Span]:
    topology = topology or Topology()
    _, path = viterbi_path(words, phones, table, topology)
    return _spans(words, tuple(phones), path, None)


def align_corpus(corpus: Corpus, table: EmissionTable, topology: Topology) -> List[Optional[List[Span]]]:
    """Viterbi spans per sentence; ``None`` for sentences with no legal path."""
    pairs = _corpus_pairs(corpus)
    batch = _Batch(pairs, table)
    paths, scores = batch.viterbi(table, topology, np.ones(batch.n, dtype=np.bool_))
    out: List[Optional[List[Span]]] = []
    for n, (words, phones) in enumerate(pairs):
        if not np.isfinite(scores[n]):
            out.append(None)
            continue
        path = paths[batch.ph_off[n]:batch.ph_off[n + 1]] - 0
        out.append(_spans(words, phones, path.tolist(), None))
    return out


HarvestCounts = Dict[str, Counter]


def harvest(corpus: Corpus, alignments: Sequence[Optional[List[Span]]]) -> HarvestCounts:
    if len(alignments) != len(corpus.sentences):
        raise ValueError("alignments must cover the corpus")
    counts: HarvestCounts = {}
    empty = 0
    for al in alignments:
        if al is None:
            continue
        for word, span in al:
            if not span:
                empty += 1
                continue
            counts.setdefault(word, Counter())[span] += 1
    if empty:
        log.info("%d empty word spans not harvested", empty)
    return counts


def _pron_key(p: Pronunciation) -> bytes:
    return " ".join(p).encode("utf-8")


def accept_threshold(counts: HarvestCounts, k: int, lm: Optional[PhoneLm] = None) -> Lexicon:
    """Modal pronunciation per word, kept when seen at least ``k`` times.

    Count ties prefer the higher phone-LM score when ``lm`` is given, then
    byte order of the pronunciation.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    lex = Lexicon()
    for word in sorted(counts, key=lambda w: w.encode("utf-8")):
        prons = counts[word]
        if not prons:
            continue
        top = max(prons.values())
        tied = sorted((p for p, c in prons.items() if c == top), key=_pron_key)
        best = tied[0]
        if lm is not None and len(tied) > 1:
            best = max(tied, key=lambda p: logprob(lm, p))
        if top >= k:
            lex.add(word, LexEntry(best, "learned", top))
    return lex


def pool_with_seed(learned: Lexicon, seed: Lexicon) -> Lexicon:
    """Union of both lexicons; seed pronunciations replace learned ones for shared words."""
    out = Lexicon(seed.items())
    for word, e in learned.items():
        if word not in seed:
            out.add(word, e)
    return out


def format_harvest(counts: HarvestCounts) -> str:
    rows = sorted(
        (w.encode("utf-8"), _pron_key(p), w, p, c) for w, prons in counts.items() for p, c in prons.items()
    )
    return "".join(f"{w}\t{' '.join(p)}\t{c}\n" for _, _, w, p, c in rows)


def parse_harvest(text: str, path=None) -> HarvestCounts:
    counts: HarvestCounts = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            w, p, c = line.split("\t")
            counts.setdefault(w, Counter())[tuple(p.split(" "))] = int(c)
        except ValueError:
            raise FormatError("expected word<TAB>pron<TAB>count", path, lineno) from None
    return counts


def format_emissions(table: EmissionTable, topology: Topology) -> str:
    t = topology
    lines = ["#emissions v1",
             "#topology\t" + "\t".join(repr(float(x)) for x in t.as_array()),
             "\t" + "\t".join(table.phonemes)]
    for g, row in zip(table.graphemes, table.matrix):
        lines.append(g + "\t" + "\t".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def parse_emissions(text: str, path=None) -> Tuple[EmissionTable, Topology]:
    lines = text.rstrip("\n").split("\n")
    try:
        assert lines[0] == "#emissions v1"
        topo_f = lines[1].split("\t")
        assert topo_f[0] == "#topology"
        topology = Topology(*(float(x) for x in topo_f[1:]))
        phonemes = lines[2].split("\t")[1:]
        gs, rows = [], []
        for line in lines[3:]:
            f = line.split("\t")
            gs.append(f[0])
            rows.append([float(x) for x in f[1:]])
        return EmissionTable(gs, phonemes, np.array(rows)), topology
    except (AssertionError, ValueError, IndexError) as exc:
        raise FormatError(f"malformed emission table: {exc}", path) from None


def save_emissions(table: EmissionTable, topology: Topology, path: str | os.PathLike) -> None:
    write_text(path, format_emissions(table, topology))


def learn_lexicon(corpus: Corpus, max_iters: int = 30, tol: float = 1e-4,
                  topology: Optional[Topology] = None, extra_phonemes: Sequence[str] = ()):
    """Baum-Welch, Viterbi alignment and harvest over a decoded corpus.

    Returns (EmResult, alignments, harvest counts).
    """
    gs = {g for s in corpus.sentences for w in s.words for g in graphemes(w)}
    ps = {p for s in corpus.sentences for p in (s.phones or ())} | set(extra_phonemes)
    table = init_emissions(sorted(gs), sorted(ps))
    result = em_train(corpus, table, topology, max_iters=max_iters, tol=tol)
    alignments = align_corpus(corpus, result.table, result.topology)
    return result, alignments, harvest(corpus, alignments)
