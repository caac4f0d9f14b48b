import dataclasses

import pytest

from pronlearn.core import format_corpus, format_lexicon
from pronlearn.synthlang import (SynthSpec, format_rules, frequency_order, generate_language, parse_rules,
                                 split_lexicon, split_seed, write_language)

SMALL = SynthSpec(vocab_size=300, n_sentences=800, seed=3)


def leftmost_longest(rules, word):
    out, i = [], 0
    while i < len(word):
        two = tuple(word[i:i + 2])
        if len(two) == 2 and two in rules:
            out.extend(rules[two])
            i += 2
        else:
            out.extend(rules[(word[i],)])
            i += 1
    return tuple(out)


@pytest.fixture(scope="module")
def small():
    return generate_language(SMALL)


def test_same_seed_same_bytes(small, tmp_path):
    again = generate_language(dataclasses.replace(SMALL))
    assert format_lexicon(again.gold) == format_lexicon(small.gold)
    assert format_corpus(again.corpus) == format_corpus(small.corpus)
    assert format_rules(again.rules) == format_rules(small.rules)
    a = write_language(small, tmp_path / "a")
    b = write_language(again, tmp_path / "b")
    for key in a:
        assert open(a[key], "rb").read() == open(b[key], "rb").read()


def test_other_seed_differs(small):
    other = generate_language(dataclasses.replace(SMALL, seed=4))
    assert format_lexicon(other.gold) != format_lexicon(small.gold)


def test_regular_words_follow_the_rules(small):
    irregular = set(small.irregular)
    for w, e in small.gold.items():
        if w not in irregular:
            assert e.pron == leftmost_longest(small.rules, w)


def test_no_irregularity_means_fully_rule_governed():
    lang = generate_language(dataclasses.replace(SMALL, irregularity_rate=0.0))
    assert lang.irregular == []
    assert all(e.pron == leftmost_longest(lang.rules, w) for w, e in lang.gold.items())


def test_sentence_phones_concatenate_word_prons(small):
    for s in small.corpus.sentences:
        assert s.phones == tuple(p for w in s.words for p in small.gold.pron(w))
        assert SMALL.sentence_length[0] <= len(s.words) <= SMALL.sentence_length[1]


def test_vocabulary_shape(small):
    words = small.gold.words()
    assert len(words) == SMALL.vocab_size
    assert all(2 <= len(w) <= 8 for w in words)
    assert len(small.rules) == SMALL.n_graphemes + SMALL.n_digraph_rules
    assert all(len(v) <= 2 for v in small.rules.values())
    assert set(small.phonemes) >= {p for _, e in small.gold.items() for p in e.pron}


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_irregular_count_near_rate(seed):
    lang = generate_language(SynthSpec(seed=seed, n_sentences=10))
    assert 80 <= len(lang.irregular) <= 120


def test_rules_round_trip(small):
    assert parse_rules(format_rules(small.rules)) == small.rules
    with pytest.raises(ValueError):
        parse_rules("bogus\n")


def test_invalid_specs():
    with pytest.raises(ValueError):
        generate_language(SynthSpec(n_graphemes=2, n_digraph_rules=5))
    with pytest.raises(ValueError):
        generate_language(SynthSpec(irregularity_rate=1.0))
    with pytest.raises(ValueError):
        generate_language(SynthSpec(sentence_length=(4, 2)))


def test_seed_sets_nest_and_follow_frequency(small):
    split = split_seed(small, [50, 100])
    s50, s100 = set(split.seeds[50].words()), set(split.seeds[100].words())
    assert s50 < s100 and len(s50) == 50 and len(s100) == 100
    counts = small.corpus.word_counts()
    top = max(counts, key=lambda w: (counts[w], [-b for b in w.encode()]))
    assert top in s50
    assert frequency_order(small.gold, small.corpus)[0] == top
    assert not set(split.test.words()) & s100
    assert len(split.test) == round(0.2 * (SMALL.vocab_size - 100))


def test_split_errors(small):
    with pytest.raises(ValueError):
        split_seed(small, [SMALL.vocab_size])
    with pytest.raises(ValueError):
        split_seed(small, [SMALL.vocab_size + 1])
    with pytest.raises(ValueError):
        split_seed(small, [])
    with pytest.raises(ValueError):
        split_seed(small, [0])


def test_split_is_deterministic(small):
    a = split_lexicon(small.gold, small.corpus, [10, 20], seed=1)
    b = split_lexicon(small.gold, small.corpus, [20, 10], seed=1)
    assert a.test == b.test and a.seeds == b.seeds
