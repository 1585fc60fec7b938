import re

import pytest
from hypothesis import given, strategies as st

from leadsheet.conditioning import (
    EmptyLyrics, Lexicon, LyricPrompt, StylePrompt, UnmappableCharacter, build_prefix, default_lexicon,
    default_plan, g2p, letter_to_sound, parse_lyrics, parse_sections, pinyin_split, syllabify,
)
from leadsheet.grammar import Grammar
from leadsheet.remi import TokenSeq, UnknownPhoneme, encode
from leadsheet.vocab import ARPABET, ARPABET_VOWELS, VocabMismatch, build_vocab, vocab_for_inventory
from sheets import one_bar_example

LEX = Lexicon.parse("HELLO HH AH0 L OW1\nWORLD W ER1 L D\n;;; comment\nLA L AA1\n")


def syllabify_oracle(phones):
    """Regex split: each syllable is a consonant run plus one vowel; trailing consonants join the last."""
    code = "".join("V" if p in ARPABET_VOWELS else "C" for p in phones)
    spans = [m.span() for m in re.finditer(r"C*V", code)]
    if not spans:
        return [tuple(phones)] if phones else []
    spans[-1] = (spans[-1][0], len(code))
    return [tuple(phones[a:b]) for a, b in spans]


def test_hello():
    pq = g2p(LyricPrompt((("verse", "hello"),)), LEX)
    assert pq.units() == [("HH", "AH"), ("L", "OW")]
    assert not pq.oov_words


def test_empty_lyrics():
    with pytest.raises(EmptyLyrics):
        g2p(LyricPrompt((("verse", ""),)), LEX)


def test_oov_fallback_flagged():
    pq = g2p(LyricPrompt((("verse", "hello zzyzx"),)), LEX)
    assert pq.oov_words == ("zzyzx",)
    assert all(s.oov == (s.word == 1) for s in pq.syllables)
    assert all(p in ARPABET for p in pq.phonemes())


def test_unmappable_character():
    with pytest.raises(UnmappableCharacter) as info:
        g2p(LyricPrompt((("verse", "hello"), ("chorus", "la 9la")),), LEX)
    assert info.value.position[0] == 2


def test_pinyin():
    assert pinyin_split("zhong1") == ("zh", "ong")
    assert pinyin_split("lü4") == ("l", "v")
    assert pinyin_split("ai") == ("ai",)
    pq = g2p(parse_lyrics("[verse] ni3 hao3", "zh-pinyin"))
    assert pq.units() == [("n", "i"), ("h", "ao")]
    with pytest.raises(UnmappableCharacter):
        g2p(parse_lyrics("[verse] xyz", "zh-pinyin"))


def test_parse_lyrics_tags():
    lp = parse_lyrics("first line\n[Chorus]\nla la\nla\n[bridge] hi\n")
    assert lp.lines == (("verse", "first line"), ("chorus", "la la la"), ("bridge", "hi"))
    with pytest.raises(ValueError):
        parse_lyrics("[solo] x")


def test_lexicon_parse():
    assert LEX["HELLO"] == ("HH", "AH", "L", "OW")
    assert len(LEX) == 3
    assert default_lexicon()["HELLO"] == ("HH", "AH", "L", "OW")


def test_lexicon_env(tmp_path, monkeypatch):
    p = tmp_path / "lex.txt"
    p.write_text("FOO F UW\n")
    monkeypatch.setenv("LEADSHEET_LEXICON", str(p))
    assert default_lexicon() == {"FOO": ("F", "UW")}


@given(st.lists(st.sampled_from(ARPABET), max_size=12))
def test_syllabify_matches_oracle(phones):
    assert syllabify(phones) == syllabify_oracle(phones)


@given(st.lists(st.sampled_from(["hello", "world", "la", "zzyzx", "blorp", "moon"]), min_size=1, max_size=8))
def test_phoneme_count_is_sum_of_word_lengths(words):
    pq = g2p(LyricPrompt((("verse", " ".join(words)),)), LEX)
    expected = sum(len(LEX.get(w.upper()) or letter_to_sound(w)) for w in words)
    assert len(pq.phonemes()) == expected
    assert g2p(LyricPrompt((("verse", " ".join(words)),)), LEX) == pq


def test_style_prompt_validation():
    with pytest.raises(ValueError):
        StylePrompt(tempo_bpm=300)
    with pytest.raises(ValueError):
        StylePrompt(sections=(("verse", 0),))
    assert parse_sections("verse:4, chorus:2") == (("verse", 4), ("chorus", 2))


def test_build_prefix_lengths(vocab):
    sp = StylePrompt()
    p = build_prefix(sp, vocab)
    assert p.names(vocab) == ["BOS", "Tempo_20", "TimeSig_4/4", "Key_0_major"]
    ref = encode(one_bar_example(), vocab)
    body = len(ref) - 2
    p2 = build_prefix(sp, vocab, ref=ref)
    assert len(p2) == body + 4
    assert p2.tokens[body:] == p.tokens


def test_build_prefix_checks(vocab):
    ref = encode(one_bar_example(), vocab)
    with pytest.raises(VocabMismatch):
        build_prefix(StylePrompt(), vocab, ref=TokenSeq(ref.tokens, ref.vocab_hash ^ 1))
    pq = g2p(parse_lyrics("[verse] ni3", "zh-pinyin"))
    with pytest.raises(UnknownPhoneme):
        build_prefix(StylePrompt(), vocab, pq)
    build_prefix(StylePrompt(), vocab_for_inventory("pinyin"), pq)


def test_header_is_grammar_consistent(vocab):
    g = Grammar(vocab)
    s = g.run(build_prefix(StylePrompt(tempo_bpm=90, time_sig=(3, 4), key=(9, "minor")), vocab).tokens)
    assert g.expected(s) == ("Bar",)


def test_default_plan():
    lp = parse_lyrics("[verse] hello hello hello hello\n[chorus]\n")
    pq = g2p(lp, LEX)
    assert default_plan(lp, pq) == (("verse", 1), ("chorus", 4))
