"""Shared domain types, symbol interning and TSV I/O for lexicons and corpora.

Words are plain strings whose graphemes are their Unicode scalars.
Pronunciations are tuples of opaque phoneme labels.

Lexicon file::

    word<TAB>p1 p2 p3[<TAB>provenance:count]

Corpus file::

    #lang=<tag>
    w1 w2 w3[<TAB>p1 p2 ...]
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

Pronunciation = Tuple[str, ...]

PROVENANCES = ("seed", "g2p", "learned")


class FormatError(ValueError):
    """Malformed lexicon, corpus, model or config file."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.path = path
        self.line = line


class SymbolTable:
    """Bijective text <-> integer id interning, ids assigned in first-seen order."""

    def __init__(self, symbols: Iterable[str] = ()):
        self._ids: Dict[str, int] = {}
        self._texts: List[str] = []
        for s in symbols:
            self.intern(s)

    def intern(self, text: str) -> int:
        idx = self._ids.get(text)
        if idx is None:
            if not text or any(c.isspace() for c in text):
                raise ValueError(f"invalid symbol {text!r}")
            idx = len(self._texts)
            self._ids[text] = idx
            self._texts.append(text)
        return idx

    def id(self, text: str) -> int:
        return self._ids[text]

    def get(self, text: str, default: int = -1) -> int:
        return self._ids.get(text, default)

    def text(self, idx: int) -> str:
        return self._texts[idx]

    def __contains__(self, text: str) -> bool:
        return text in self._ids

    def __len__(self) -> int:
        return len(self._texts)

    def __iter__(self) -> Iterator[str]:
        return iter(self._texts)

    def encode(self, texts: Sequence[str]) -> List[int]:
        return [self.intern(t) for t in texts]


def graphemes(word: str) -> Tuple[str, ...]:
    return tuple(word)


def validate_word(word: str) -> None:
    if not word or any(c.isspace() for c in word):
        raise ValueError(f"invalid word {word!r}")


def _sort_key_pron(pron: Pronunciation) -> bytes:
    return " ".join(pron).encode("utf-8")


@dataclass(frozen=True)
class LexEntry:
    pron: Pronunciation
    provenance: str = "seed"
    count: int = 0

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.count < 0:
            raise ValueError("count must be non-negative")


class Lexicon:
    """Ordered map word -> pronunciation variants.

    Iteration and serialization follow byte order of the word, then of the
    space-joined pronunciation, so equal entry sets always serialize to the
    same bytes.
    """

    def __init__(self, entries: Iterable[Tuple[str, LexEntry]] = ()):
        self._entries: Dict[str, List[LexEntry]] = {}
        for word, entry in entries:
            self.add(word, entry)

    def add(self, word: str, entry: LexEntry) -> None:
        validate_word(word)
        if not entry.pron:
            raise ValueError(f"empty pronunciation for {word!r}")
        variants = self._entries.setdefault(word, [])
        if any(v.pron == entry.pron for v in variants):
            raise ValueError(f"duplicate entry {word!r} -> {' '.join(entry.pron)}")
        variants.append(entry)
        variants.sort(key=lambda e: _sort_key_pron(e.pron))

    def add_pron(self, word: str, pron: Sequence[str], provenance: str = "seed", count: int = 0) -> None:
        self.add(word, LexEntry(tuple(pron), provenance, count))

    def words(self) -> List[str]:
        return sorted(self._entries, key=lambda w: w.encode("utf-8"))

    def variants(self, word: str) -> List[LexEntry]:
        return list(self._entries.get(word, ()))

    def pron(self, word: str) -> Pronunciation:
        """First (canonical-order) pronunciation of ``word``."""
        return self._entries[word][0].pron

    def items(self) -> Iterator[Tuple[str, LexEntry]]:
        for w in self.words():
            for e in self._entries[w]:
                yield w, e

    def subset(self, words: Iterable[str]) -> "Lexicon":
        keep = set(words)
        return Lexicon((w, e) for w, e in self.items() if w in keep)

    def without(self, words: Iterable[str]) -> "Lexicon":
        drop = set(words)
        return Lexicon((w, e) for w, e in self.items() if w not in drop)

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def num_entries(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lexicon):
            return NotImplemented
        return list(self.items()) == list(other.items())

    def __repr__(self) -> str:
        return f"Lexicon({len(self)} words, {self.num_entries()} entries)"


def format_lexicon(lex: Lexicon) -> str:
    lines = []
    for word, e in lex.items():
        line = f"{word}\t{' '.join(e.pron)}"
        if e.provenance != "seed" or e.count != 0:
            line += f"\t{e.provenance}:{e.count}"
        lines.append(line + "\n")
    return "".join(lines)


def parse_lexicon(text: str, path: Optional[str] = None) -> Lexicon:
    lex = Lexicon()
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (2, 3):
            raise FormatError("expected word<TAB>pronunciation[<TAB>provenance:count]", path, lineno)
        word, pron_field = fields[0], fields[1]
        pron = tuple(pron_field.split(" "))
        if not word or any(c.isspace() for c in word):
            raise FormatError(f"invalid word {word!r}", path, lineno)
        if not pron_field or any(not p for p in pron):
            raise FormatError("empty or malformed pronunciation", path, lineno)
        provenance, count = "seed", 0
        if len(fields) == 3:
            prov, _, cnt = fields[2].partition(":")
            if prov not in PROVENANCES or not cnt.isdigit():
                raise FormatError(f"bad provenance field {fields[2]!r}", path, lineno)
            provenance, count = prov, int(cnt)
        try:
            lex.add(word, LexEntry(pron, provenance, count))
        except ValueError as exc:
            raise FormatError(str(exc), path, lineno) from None
    return lex


def read_lexicon(path: str | os.PathLike) -> Lexicon:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_lexicon(f.read(), str(path))


def write_lexicon(lex: Lexicon, path: str | os.PathLike) -> None:
    write_text(path, format_lexicon(lex))


def write_text(path: str | os.PathLike, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


@dataclass(frozen=True)
class Sentence:
    words: Tuple[str, ...]
    phones: Optional[Pronunciation] = None

    def __post_init__(self):
        if not self.words:
            raise ValueError("sentence needs at least one word")


@dataclass
class Corpus:
    language_tag: str
    sentences: List[Sentence] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)

    def vocabulary(self) -> List[str]:
        seen = {w for s in self.sentences for w in s.words}
        return sorted(seen, key=lambda w: w.encode("utf-8"))

    def word_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for s in self.sentences:
            for w in s.words:
                counts[w] = counts.get(w, 0) + 1
        return counts

    def with_phones(self, phones: Sequence[Optional[Pronunciation]]) -> "Corpus":
        if len(phones) != len(self.sentences):
            raise ValueError("phone list length does not match sentence count")
        return Corpus(self.language_tag, [Sentence(s.words, p) for s, p in zip(self.sentences, phones)])


def format_corpus(corpus: Corpus) -> str:
    out = [f"#lang={corpus.language_tag}\n"]
    for s in corpus.sentences:
        line = " ".join(s.words)
        if s.phones is not None:
            line += "\t" + " ".join(s.phones)
        out.append(line + "\n")
    return "".join(out)


def parse_corpus(text: str, path: Optional[str] = None) -> Corpus:
    tag = None
    sentences: List[Sentence] = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.rstrip("\r")
        if tag is None:
            if not line.strip():
                continue
            if not line.startswith("#lang="):
                raise FormatError("missing #lang=<tag> header", path, lineno)
            tag = line[len("#lang="):].strip()
            if not tag or any(c.isspace() for c in tag):
                raise FormatError("empty language tag", path, lineno)
            continue
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) > 2:
            raise FormatError("too many TAB-separated fields", path, lineno)
        words = tuple(fields[0].split(" "))
        if not fields[0] or any(not w for w in words):
            raise FormatError("empty sentence or empty word field", path, lineno)
        phones: Optional[Pronunciation] = None
        if len(fields) == 2:
            phones = tuple(fields[1].split(" ")) if fields[1] else ()
            if any(not p for p in phones):
                raise FormatError("empty phoneme field", path, lineno)
        sentences.append(Sentence(words, phones))
    if tag is None:
        raise FormatError("missing #lang=<tag> header", path, 1)
    return Corpus(tag, sentences)


def read_corpus(path: str | os.PathLike) -> Corpus:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_corpus(f.read(), str(path))


def write_corpus(corpus: Corpus, path: str | os.PathLike) -> None:
    write_text(path, format_corpus(corpus))
