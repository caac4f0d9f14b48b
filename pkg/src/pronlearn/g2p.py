"""Joint-sequence (graphone) grapheme-to-phoneme model.

Training aligns graphemes to phonemes with EM over chunk pairs of shape
(1,0), (1,1), (1,2) and (2,1), takes the Viterbi alignment of each entry as a
graphone sequence, and counts a Witten-Bell graphone n-gram on those
sequences.  Every sequence starts with a language-tag graphone, which is
context only and is never predicted.
"""
from __future__ import annotations

import logging
import math
import os
import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import FormatError, LexEntry, Lexicon, Pronunciation, graphemes, write_text
from .ngram import WittenBellNgram

log = logging.getLogger(__name__)

HEADER = "#g2pmodel v1"
END = "</w>"
CHUNK_SHAPES = ((1, 0), (1, 1), (1, 2), (2, 1))

Chunk = Tuple[Tuple[str, ...], Tuple[str, ...]]


class G2pError(ValueError):
    pass


class OovGraphemeError(G2pError):
    def __init__(self, word: str, grapheme: str):
        super().__init__(f"grapheme {grapheme!r} in {word!r} is not in the model inventory")
        self.word = word
        self.grapheme = grapheme


class UnalignableError(G2pError):
    def __init__(self, words: Sequence[str]):
        shown = ", ".join(words[:20]) + (" ..." if len(words) > 20 else "")
        super().__init__(f"{len(words)} entries admit no legal chunking: {shown}")
        self.words = list(words)


@dataclass(frozen=True)
class TaggedEntry:
    language_tag: str
    word: str
    pron: Pronunciation
    weight: float = 1.0

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("weight must be positive")


def tagged(lex: Lexicon, tag: str, weight: float = 1.0) -> List[TaggedEntry]:
    return [TaggedEntry(tag, w, e.pron, weight) for w, e in lex.items()]


def tag_symbol(tag: str) -> str:
    return f"<{tag}>"


def _lattice(g: Sequence[str], p: Sequence[str]) -> List[Tuple[int, int, Chunk]]:
    """Edges (src node, dst node, chunk) in topological order; node = i*(m+1)+j."""
    n, m = len(g), len(p)
    edges = []
    for i in range(n):
        for j in range(m + 1):
            for dg, dp in CHUNK_SHAPES:
                if i + dg <= n and j + dp <= m:
                    chunk = (tuple(g[i:i + dg]), tuple(p[j:j + dp]))
                    edges.append((i * (m + 1) + j, (i + dg) * (m + 1) + j + dp, chunk))
    return edges


def _prune(edges, n_nodes, start, end):
    """Keep edges lying on some start->end path."""
    fwd = [False] * n_nodes
    fwd[start] = True
    for s, d, _ in edges:
        if fwd[s]:
            fwd[d] = True
    bwd = [False] * n_nodes
    bwd[end] = True
    for s, d, _ in reversed(edges):
        if bwd[d]:
            bwd[s] = True
    return [e for e in edges if fwd[e[0]] and bwd[e[1]]]


class G2pModel:
    """Trained graphone model.  Treat as read-only."""

    def __init__(self, order: int, graphones: List[Chunk], ngram: WittenBellNgram,
                 chunk_probs: Dict[Chunk, float], grapheme_inventory: Iterable[str],
                 languages: Iterable[str], lam: float = 1.0,
                 graphone_langs: Optional[Dict[int, Iterable[str]]] = None):
        self.order = order
        self.graphones = list(graphones)
        self.ids = {gp: i for i, gp in enumerate(self.graphones)}
        self.ngram = ngram
        self.chunk_probs = dict(chunk_probs)
        self.grapheme_inventory = frozenset(grapheme_inventory)
        self.languages = tuple(sorted(languages))
        self.lam = lam
        self.end_id = self.ids[((END,), ())]
        # languages each graphone was observed in
        if graphone_langs is None:
            graphone_langs = {i: self.languages for i in range(len(self.graphones))}
        self.graphone_langs = {i: frozenset(v) for i, v in graphone_langs.items() if v}
        self._by_gchunk: Dict[Tuple[str, ...], List[int]] = {}
        self._by_lang: Dict[Tuple[str, Tuple[str, ...]], List[int]] = {}
        for i, (gc, pc) in enumerate(self.graphones):
            if gc[0].startswith("<") and len(gc[0]) > 1:
                continue
            self._by_gchunk.setdefault(gc, []).append(i)
            for lang in self.graphone_langs.get(i, ()):
                self._by_lang.setdefault((lang, gc), []).append(i)
        self._logp: Dict[Tuple, float] = {}

    def tag_id(self, tag: str) -> int:
        gid = self.ids.get(((tag_symbol(tag),), ()))
        if gid is None:
            raise G2pError(f"unknown language tag {tag!r}")
        return gid

    def logprob(self, tok: int, hist: Tuple[int, ...]) -> float:
        key = (tok, hist)
        lp = self._logp.get(key)
        if lp is None:
            lp = math.log(self.ngram.prob(tok, hist))
            self._logp[key] = lp
        return lp

    def start_history(self, tag: str) -> Tuple[int, ...]:
        if self.order == 1:
            return ()
        return (self.tag_id(tag),)

    def score_sequence(self, tag: str, ids: Sequence[int]) -> float:
        """Log probability of a full graphone sequence, end token included."""
        n = self.order
        toks = [self.tag_id(tag), *ids, self.end_id]
        total = 0.0
        for i in range(1, len(toks)):
            hist = tuple(toks[max(0, i - n + 1):i]) if n > 1 else ()
            total += self.logprob(toks[i], hist)
        return total

    def candidates(self, gchunk: Tuple[str, ...], tag: Optional[str] = None) -> List[int]:
        """Graphones for ``gchunk``; with ``tag``, only those observed in that language."""
        if tag is not None:
            return self._by_lang.get((tag, gchunk), [])
        return self._by_gchunk.get(gchunk, [])

    def segmentation_candidates(self, word: str, pos: int, tag: Optional[str] = None) -> List[Tuple[int, int]]:
        """(graphone id, next position) continuations at ``pos``.  Id -1 marks
        a silent fallback for a grapheme with no single-grapheme graphone."""
        g = graphemes(word)
        out = [(gid, pos + 1) for gid in self.candidates(g[pos:pos + 1], tag)]
        if not out:
            out.append((-1, pos + 1))
        if pos + 2 <= len(g):
            out += [(gid, pos + 2) for gid in self.candidates(g[pos:pos + 2], tag)]
        return out

    def phonemes_of(self, ids: Sequence[int]) -> Pronunciation:
        out: List[str] = []
        for gid in ids:
            if gid >= 0:
                out.extend(self.graphones[gid][1])
        return tuple(out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, G2pModel):
            return NotImplemented
        return format_model(self) == format_model(other)


def _em_align(data: Sequence[TaggedEntry], em_iters: int, seed: int):
    """EM over chunk alignments; returns (chunk probs, per-entry edges, loglik trace)."""
    lattices = []
    bad = []
    chunk_ids: Dict[Chunk, int] = {}
    chunks: List[Chunk] = []
    for e in data:
        g, p = graphemes(e.word), e.pron
        n_nodes = (len(g) + 1) * (len(p) + 1)
        edges = _prune(_lattice(g, p), n_nodes, 0, n_nodes - 1)
        if not edges:
            bad.append(e.word)
            continue
        enc = []
        for s, d, c in edges:
            cid = chunk_ids.get(c)
            if cid is None:
                cid = chunk_ids[c] = len(chunks)
                chunks.append(c)
            enc.append((s, d, cid))
        lattices.append((n_nodes, enc, e.weight))
    if bad:
        raise UnalignableError(bad)

    rng = random.Random(seed)
    theta = [1.0 + 1e-3 * rng.random() for _ in chunks]
    z = sum(theta)
    theta = [t / z for t in theta]
    trace: List[float] = []
    total_weight = sum(w for _, _, w in lattices)
    for it in range(em_iters):
        counts = [0.0] * len(chunks)
        ll = 0.0
        for n_nodes, edges, w in lattices:
            alpha = [0.0] * n_nodes
            alpha[0] = 1.0
            for s, d, c in edges:
                alpha[d] += alpha[s] * theta[c]
            beta = [0.0] * n_nodes
            beta[-1] = 1.0
            for s, d, c in reversed(edges):
                beta[s] += theta[c] * beta[d]
            z = alpha[-1]
            ll += w * math.log(z)
            scale = w / z
            for s, d, c in edges:
                counts[c] += alpha[s] * theta[c] * beta[d] * scale
        trace.append(ll)
        tot = sum(counts)
        theta = [c / tot for c in counts]
        if it > 0 and abs(trace[-1] - trace[-2]) < 1e-4 * total_weight:
            break
    return chunks, theta, lattices, trace


def _viterbi_chunks(n_nodes, edges, logt) -> List[int]:
    """Best chunk-id path; exact ties go to the lexicographically smaller path."""
    best = [-math.inf] * n_nodes
    best[-1] = 0.0
    for s, d, c in reversed(edges):
        v = logt[c] + best[d]
        if v > best[s]:
            best[s] = v
    out_edges: Dict[int, List[Tuple[int, int]]] = {}
    for s, d, c in edges:
        out_edges.setdefault(s, []).append((c, d))
    node, path = 0, []
    while node != n_nodes - 1:
        cand = None
        for c, d in sorted(out_edges[node]):
            v = logt[c] + best[d]
            if cand is None or v > cand[0] + 1e-12 * max(1.0, abs(v)):
                cand = (v, c, d)
        path.append(cand[1])
        node = cand[2]
    return path


def train_g2p(data: Sequence[TaggedEntry], order: int = 3, em_iters: int = 10, seed: int = 0,
              lam: float = 1.0) -> G2pModel:
    if not data:
        raise G2pError("no training data")
    if not 1 <= order <= 5:
        raise G2pError("order must be in [1, 5]")
    for e in data:
        if not e.pron:
            raise G2pError(f"empty pronunciation for {e.word!r}")
    chunks, theta, lattices, trace = _em_align(data, em_iters, seed)
    log.debug("g2p alignment EM loglik trace %s", trace)
    logt = [math.log(t) if t > 0 else -math.inf for t in theta]

    graphone_ids: Dict[Chunk, int] = {}
    graphones: List[Chunk] = []

    def gid(chunk: Chunk) -> int:
        i = graphone_ids.get(chunk)
        if i is None:
            i = graphone_ids[chunk] = len(graphones)
            graphones.append(chunk)
        return i

    end_id = gid(((END,), ()))
    for tag in sorted({e.language_tag for e in data}):
        gid(((tag_symbol(tag),), ()))
    ngram = WittenBellNgram(order)
    langs: Dict[int, set] = {}
    for e, (n_nodes, edges, w) in zip(data, lattices):
        path = _viterbi_chunks(n_nodes, edges, logt)
        toks = [graphone_ids[((tag_symbol(e.language_tag),), ())]]
        toks += [gid(chunks[c]) for c in path]
        for t in toks[1:]:
            langs.setdefault(t, set()).add(e.language_tag)
        toks.append(end_id)
        ngram.add_sequence(toks, w)
    chunk_probs = {chunks[i]: t for i, t in enumerate(theta) if t > 0}
    model = G2pModel(order, graphones, ngram, chunk_probs,
                     {ch for e in data for ch in graphemes(e.word)},
                     {e.language_tag for e in data}, lam, langs)
    model.em_trace = trace
    return model


def fine_tune(model_data: Sequence[TaggedEntry], target: Sequence[TaggedEntry], lam: float = 5.0,
              order: int = 3, em_iters: int = 10, seed: int = 0) -> G2pModel:
    """Retrain on ``model_data`` plus ``target`` with target counts scaled by ``lam``."""
    if not target:
        raise G2pError("fine-tuning needs a non-empty target set")
    if lam < 1:
        raise G2pError("lambda must be >= 1")
    pooled = list(model_data) + [TaggedEntry(e.language_tag, e.word, e.pron, e.weight * lam) for e in target]
    return train_g2p(pooled, order=order, em_iters=em_iters, seed=seed, lam=lam)


def predict(model: G2pModel, tag: str, word: str, beam: int = 8) -> Pronunciation:
    ids = predict_graphones(model, tag, word, beam)[1]
    return model.phonemes_of(ids)


def predict_graphones(model: G2pModel, tag: str, word: str, beam: int = 8) -> Tuple[float, Tuple[int, ...]]:
    """Beam search over graphone segmentations.

    Hypotheses are kept position-synchronously and recombined on their n-gram
    history; among equal scores the lexicographically smaller id sequence wins.
    """
    if beam < 1:
        raise G2pError("beam must be >= 1")
    g = graphemes(word)
    if not g:
        raise G2pError("empty word")
    for ch in g:
        if ch not in model.grapheme_inventory:
            raise OovGraphemeError(word, ch)
    n = len(g)
    keep = model.order - 1
    start = model.start_history(tag)
    # frontier[pos]: history -> (score, ids)
    frontier: List[Dict[Tuple[int, ...], Tuple[float, Tuple[int, ...]]]] = [dict() for _ in range(n + 1)]
    frontier[0][start] = (0.0, ())
    final: Optional[Tuple[float, Tuple[int, ...]]] = None
    for pos in range(n + 1):
        hyps = sorted(frontier[pos].items(), key=lambda kv: (-kv[1][0], kv[1][1]))[:beam]
        for hist, (score, ids) in hyps:
            if pos == n:
                s = score + model.logprob(model.end_id, hist)
                if final is None or s > final[0] or (s == final[0] and ids < final[1]):
                    final = (s, ids)
                continue
            for gid, nxt in model.segmentation_candidates(word, pos, tag):
                s = score + model.logprob(gid, hist)
                new_ids = ids + (gid,)
                new_hist = (hist + (gid,))[-keep:] if keep else ()
                cur = frontier[nxt].get(new_hist)
                if cur is None or s > cur[0] or (s == cur[0] and new_ids < cur[1]):
                    frontier[nxt][new_hist] = (s, new_ids)
    assert final is not None
    return final


def apply_g2p(model: G2pModel, tag: str, vocabulary: Iterable[str], beam: int = 8) -> Tuple[Lexicon, List[str]]:
    """Pronounce ``vocabulary``; returns (lexicon, skipped words)."""
    lex = Lexicon()
    skipped = []
    for word in vocabulary:
        try:
            pron = predict(model, tag, word, beam)
        except OovGraphemeError:
            skipped.append(word)
            continue
        if not pron:
            skipped.append(word)
            continue
        lex.add(word, LexEntry(pron, "g2p", 0))
    return lex, skipped


def _fmt_seq(seq: Sequence[str]) -> str:
    return " ".join(seq)


def format_model(model: G2pModel) -> str:
    lines = [HEADER, f"order\t{model.order}", f"lambda\t{model.lam!r}",
             "languages\t" + " ".join(model.languages),
             "graphemes\t" + " ".join(sorted(model.grapheme_inventory)),
             "[graphones]"]
    for i, (gc, pc) in enumerate(model.graphones):
        langs = " ".join(sorted(model.graphone_langs.get(i, ())))
        lines.append(f"{i}\t{_fmt_seq(gc)}\t{_fmt_seq(pc)}\t{langs}")
    lines.append("[chunkprobs]")
    rows = sorted((_fmt_seq(gc), _fmt_seq(pc), repr(p)) for (gc, pc), p in model.chunk_probs.items())
    lines += ["\t".join(r) for r in rows]
    lines.append("[counts]")
    lines += model.ngram.to_lines(str)
    return "\n".join(lines) + "\n"


def parse_model(text: str, path=None) -> G2pModel:
    lines = text.rstrip("\n").split("\n")
    if not lines or lines[0] != HEADER:
        raise FormatError(f"expected {HEADER!r} header", path, 1)
    try:
        meta = {}
        i = 1
        while lines[i] != "[graphones]":
            k, _, v = lines[i].partition("\t")
            meta[k] = v
            i += 1
        i += 1
        graphones = []
        langs = {}
        while lines[i] != "[chunkprobs]":
            idx, gc, pc, lg = lines[i].split("\t")
            assert int(idx) == len(graphones)
            if lg:
                langs[len(graphones)] = lg.split(" ")
            graphones.append((tuple(gc.split(" ")), tuple(pc.split(" ")) if pc else ()))
            i += 1
        i += 1
        chunk_probs = {}
        while lines[i] != "[counts]":
            gc, pc, p = lines[i].split("\t")
            chunk_probs[(tuple(gc.split(" ")), tuple(pc.split(" ")) if pc else ())] = float(p)
            i += 1
        order = int(meta["order"])
        ngram = WittenBellNgram.from_lines(order, lines[i + 1:], int)
        return G2pModel(order, graphones, ngram, chunk_probs,
                        meta["graphemes"].split(" ") if meta["graphemes"] else [],
                        meta["languages"].split(" ") if meta["languages"] else [],
                        float(meta["lambda"]), langs)
    except (ValueError, KeyError, AssertionError, IndexError) as exc:
        raise FormatError(f"malformed g2p model: {exc}", path) from None


def save_model(model: G2pModel, path: str | os.PathLike) -> None:
    write_text(path, format_model(model))


def load_model(path: str | os.PathLike) -> G2pModel:
    with open(path, encoding="utf-8") as f:
        return parse_model(f.read(), str(path))
