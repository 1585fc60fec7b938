import random
import warnings

import pytest

from leadsheet.conditioning import Lexicon
from leadsheet.core import TrackKind
from leadsheet.editor import (
    Candidate, EditMask, EditMode, EmptyRegion, SyllableMismatch, apply_edit, edit_lyrics, edit_melody,
    inpaint_candidates, outside_mask_diff, parse_edit_spec, regen_region, select,
)
from leadsheet.grammar import Grammar
from leadsheet.ngram import score
from leadsheet.remi import decode, encode

LEX = Lexicon.parse("LA L AA\nTI T IY\nLOVE L AH V\nMOON M UW N\n")


def _melody(ls):
    return [(e.onset, e.pitch) for e in ls.events(TrackKind.VOCAL)]


def test_melody_edit_locality(toy_sheets, toy_model, vocab):
    ls = toy_sheets[0]
    mask = EditMask(2, 4, frozenset({TrackKind.VOCAL}), EditMode.MELODY)
    out = edit_melody(ls, mask, toy_model, vocab=vocab, n_candidates=4)
    d = outside_mask_diff(ls, out, mask)
    assert d.is_empty
    assert out.n_bars == ls.n_bars and out.track(TrackKind.CHORD) == ls.track(TrackKind.CHORD)
    inside = lambda s: [e.phonemes for e in s.events(TrackKind.VOCAL) if 2 <= e.onset.bar < 4]
    assert inside(out) == inside(ls)


def test_selection_matches_brute_force(toy_sheets, toy_model, vocab):
    ls = toy_sheets[1]
    mask = EditMask(1, 3, frozenset({TrackKind.VOCAL}), EditMode.MELODY)
    cands = inpaint_candidates(ls, mask, toy_model, vocab=vocab, n_candidates=6)
    best = max(range(len(cands)), key=lambda i: (cands[i].score, -i))
    assert select(cands) == best
    out = edit_melody(ls, mask, toy_model, vocab=vocab, n_candidates=6)
    assert _melody(out) == _melody(decode(cands[best].tokens, vocab))
    for c in cands:
        assert Grammar(vocab).validate(c.tokens.tokens)


def test_candidate_scores_are_region_log_likelihood(toy_sheets, toy_model, vocab):
    ls = toy_sheets[2]
    mask = EditMask(0, 2, frozenset({TrackKind.VOCAL}), EditMode.MELODY)
    orig = list(encode(ls, vocab).tokens)
    for c in inpaint_candidates(ls, mask, toy_model, vocab=vocab, n_candidates=3, right_ctx_bars=100):
        toks = c.tokens.tokens
        # region plus all right context: everything after the unchanged left part
        lo = next(i for i, (a, b) in enumerate(zip(orig, toks)) if a != b)
        lo = min(lo, [i for i, t in enumerate(orig) if vocab.name(t) == "Bar"][0])
        assert c.score == pytest.approx(score(toy_model, toks) - score(toy_model, toks, end=lo), abs=1e-9)


def test_select_ties_lowest_index():
    from leadsheet.remi import TokenSeq

    t = TokenSeq((), 0)
    assert select([Candidate(t, -2.0), Candidate(t, -1.0), Candidate(t, -1.0)]) == 1


def test_candidates_reproducible(toy_sheets, toy_model, vocab):
    ls = toy_sheets[0]
    mask = EditMask(3, 5, frozenset({TrackKind.VOCAL, TrackKind.BASS}), EditMode.REGION)
    a = inpaint_candidates(ls, mask, toy_model, vocab=vocab, n_candidates=4)
    b = inpaint_candidates(ls, mask, toy_model, vocab=vocab, n_candidates=2)
    assert a[:2] == b


def test_region_regen_locality(toy_sheets, toy_model, vocab):
    rng = random.Random(0)
    for i in range(6):
        ls = toy_sheets[i % len(toy_sheets)]
        a = rng.randrange(ls.n_bars)
        b = rng.randint(a + 1, ls.n_bars)
        kinds = frozenset(rng.sample([t.kind for t in ls.tracks], rng.randint(1, len(ls.tracks))))
        mask = EditMask(a, b, kinds, EditMode.REGION)
        out = regen_region(ls, mask, toy_model, vocab=vocab, n_candidates=2)
        assert outside_mask_diff(ls, out, mask).is_empty


def test_lyric_edit_equal_syllables(toy_sheets, vocab):
    ls = toy_sheets[0]
    mask = EditMask(0, 1, frozenset({TrackKind.VOCAL}), EditMode.LYRICS)
    n = sum(1 for e in ls.events(TrackKind.VOCAL) if e.onset.bar == 0 and e.phonemes)
    out = edit_lyrics(ls, mask, " ".join(["ti"] * n), LEX)
    assert [(e.onset, e.duration, e.pitch) for e in out.events(TrackKind.VOCAL)] == \
           [(e.onset, e.duration, e.pitch) for e in ls.events(TrackKind.VOCAL)]
    assert [e.phonemes for e in out.events(TrackKind.VOCAL) if e.onset.bar == 0] == [("T", "IY")] * n
    assert outside_mask_diff(ls, out, mask).is_empty


def test_lyric_edit_mismatch_warns_and_regenerates(toy_sheets, toy_model, vocab):
    ls = toy_sheets[0]
    mask = EditMask(1, 3, frozenset({TrackKind.VOCAL}), EditMode.LYRICS)
    with pytest.warns(SyllableMismatch):
        out = edit_lyrics(ls, mask, "love moon", LEX, vocab=vocab, m_cond=toy_model, n_candidates=2)
    assert [e.phonemes for e in out.events(TrackKind.VOCAL) if 1 <= e.onset.bar < 3 and e.phonemes] == \
           [("L", "AH", "V"), ("M", "UW", "N")]
    assert outside_mask_diff(ls, out, mask).is_empty
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError):
            edit_lyrics(ls, mask, "love moon", LEX)


def test_empty_region(toy_sheets, toy_model, vocab):
    from dataclasses import replace

    ls = replace(toy_sheets[0], n_bars=toy_sheets[0].n_bars + 2)
    mask = EditMask(ls.n_bars - 2, ls.n_bars, frozenset({TrackKind.VOCAL}), EditMode.MELODY)
    with pytest.raises(EmptyRegion):
        edit_melody(ls, mask, toy_model, vocab=vocab)


def test_mask_validation(toy_sheets):
    with pytest.raises(ValueError):
        EditMask(3, 3, frozenset({TrackKind.VOCAL}), EditMode.MELODY)
    with pytest.raises(ValueError):
        EditMask(0, 99, frozenset({TrackKind.VOCAL}), EditMode.MELODY).check(toy_sheets[0])


def test_parse_edit_spec(toy_sheets, toy_model, vocab):
    mask, lyrics, lang = parse_edit_spec({"bars": [0, 2], "mode": "lyric-edit", "lyrics": "la la"})
    assert mask == EditMask(0, 2, frozenset({TrackKind.VOCAL}), EditMode.LYRICS)
    assert (lyrics, lang) == ("la la", "en")
    with pytest.raises(ValueError):
        parse_edit_spec({"bars": [0, 2], "colour": "red"})
    mask, _, _ = parse_edit_spec({"bars": [0, 2], "mode": "region-regen", "tracks": ["bass"]})
    out = apply_edit(toy_sheets[0], mask, toy_model, vocab=vocab, n_candidates=1)
    assert outside_mask_diff(toy_sheets[0], out, mask).is_empty
