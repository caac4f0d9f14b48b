import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pronlearn.core import (Corpus, FormatError, LexEntry, Lexicon, Sentence, SymbolTable, format_corpus,
                            format_lexicon, parse_corpus, parse_lexicon, read_corpus, read_lexicon, write_corpus,
                            write_lexicon)

SYMS = st.text(alphabet="abcxyzé{@:", min_size=1, max_size=3)


def test_read_lexicon_line(tmp_path):
    p = tmp_path / "a.lex"
    p.write_text("cat\tk { t\n", encoding="utf-8")
    lex = read_lexicon(p)
    assert lex.words() == ["cat"]
    assert lex.pron("cat") == ("k", "{", "t")


def test_empty_file_is_empty_lexicon(tmp_path):
    p = tmp_path / "a.lex"
    p.write_text("", encoding="utf-8")
    assert len(read_lexicon(p)) == 0


def test_missing_tab_reports_line_number():
    with pytest.raises(FormatError) as err:
        parse_lexicon("cat\n")
    assert err.value.line == 1


def test_empty_pronunciation_is_rejected():
    with pytest.raises(FormatError) as err:
        parse_lexicon("# header\ncat\tk a t\ndog\t\n")
    assert err.value.line == 3


def test_duplicate_entry_is_rejected():
    with pytest.raises(FormatError) as err:
        parse_lexicon("cat\tk a t\ncat\tk a t\n")
    assert err.value.line == 2


def test_comments_and_blank_lines_are_skipped():
    lex = parse_lexicon("# comment\n\ncat\tk a t\n")
    assert len(lex) == 1


def test_write_empty_lexicon_is_zero_bytes(tmp_path):
    p = tmp_path / "a.lex"
    write_lexicon(Lexicon(), p)
    assert p.read_bytes() == b""


def test_write_one_entry(tmp_path):
    p = tmp_path / "a.lex"
    lex = Lexicon()
    lex.add_pron("cat", ["k", "a", "t"])
    write_lexicon(lex, p)
    assert p.read_bytes() == b"cat\tk a t\n"


def test_insertion_order_does_not_change_bytes(tmp_path):
    a, b = Lexicon(), Lexicon()
    a.add_pron("zed", ["z"])
    a.add_pron("abc", ["a"])
    b.add_pron("abc", ["a"])
    b.add_pron("zed", ["z"])
    write_lexicon(a, tmp_path / "a")
    write_lexicon(b, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert (tmp_path / "a").read_bytes().startswith(b"abc")


def test_provenance_field_round_trips():
    lex = Lexicon()
    lex.add("w", LexEntry(("a",), "learned", 3))
    lex.add_pron("v", ["b"], "g2p")
    text = format_lexicon(lex)
    assert "w\ta\tlearned:3\n" in text
    assert parse_lexicon(text) == lex


def test_variants_sorted_by_pronunciation():
    lex = Lexicon()
    lex.add_pron("w", ["b"])
    lex.add_pron("w", ["a"])
    assert [e.pron for e in lex.variants("w")] == [("a",), ("b",)]
    assert format_lexicon(lex) == "w\ta\nw\tb\n"


def test_read_corpus_example(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("#lang=xx\nab ba\tA B B A\n", encoding="utf-8")
    c = read_corpus(p)
    assert c.language_tag == "xx"
    assert c.sentences[0].words == ("ab", "ba")
    assert c.sentences[0].phones == ("A", "B", "B", "A")


def test_text_only_line_has_no_phones():
    c = parse_corpus("#lang=xx\nab ba\n")
    assert c.sentences[0].phones is None


def test_empty_word_field_is_rejected():
    with pytest.raises(FormatError):
        parse_corpus("#lang=xx\nab  ba\tA\n")


def test_missing_header_is_rejected():
    with pytest.raises(FormatError):
        parse_corpus("ab ba\tA B\n")


def test_symbol_table_interning():
    t = SymbolTable()
    a = t.intern("a")
    assert t.intern("a") == a
    b = t.intern("b")
    assert a != b and t.text(b) == "b"
    with pytest.raises(ValueError):
        t.intern("a b")


@st.composite
def lexicons(draw):
    lex = Lexicon()
    for word in draw(st.lists(SYMS, max_size=6, unique=True)):
        prons = draw(st.lists(st.lists(SYMS, min_size=1, max_size=4).map(tuple), min_size=1, max_size=3,
                              unique=True))
        for pron in prons:
            prov = draw(st.sampled_from(["seed", "g2p", "learned"]))
            lex.add(word, LexEntry(pron, prov, draw(st.integers(0, 5))))
    return lex


@given(lexicons())
def test_lexicon_round_trip(lex):
    text = format_lexicon(lex)
    again = parse_lexicon(text)
    assert again == lex
    assert format_lexicon(again) == text


@given(lexicons(), st.randoms())
def test_equal_entry_sets_serialize_identically(lex, rnd):
    items = list(lex.items())
    rnd.shuffle(items)
    assert format_lexicon(Lexicon(items)) == format_lexicon(lex)


@st.composite
def corpora(draw):
    sents = []
    for _ in range(draw(st.integers(0, 5))):
        words = tuple(draw(st.lists(SYMS, min_size=1, max_size=4)))
        phones = draw(st.one_of(st.none(), st.lists(SYMS, max_size=5).map(tuple)))
        sents.append(Sentence(words, phones))
    return Corpus(draw(st.sampled_from(["xx", "en-us"])), sents)


@settings(max_examples=60)
@given(corpora())
def test_corpus_round_trip(corpus):
    text = format_corpus(corpus)
    again = parse_corpus(text)
    assert again.language_tag == corpus.language_tag
    assert again.sentences == corpus.sentences
    assert format_corpus(again) == text


def test_corpus_file_round_trip(tmp_path):
    c = Corpus("xx", [Sentence(("a", "b"), ("A",)), Sentence(("c",), None), Sentence(("d",), ())])
    write_corpus(c, tmp_path / "c.txt")
    assert read_corpus(tmp_path / "c.txt").sentences == c.sentences
