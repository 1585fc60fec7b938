import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from leadsheet.conditioning import Lexicon, LyricPrompt, g2p
from leadsheet.core import ChordEvent, GridPosition, LeadSheet, LeadSheetMeta, NoteEvent, TrackKind
from leadsheet.metrics import (
    EmptyReference, MissingChords, MissingKey, chord_tone_rate, evaluate, lyric_wer, scale_consistency,
    segment_words, structure_match, wer,
)
from oracles import levenshtein
from sheets import random_sheet

LEX = Lexicon.parse("LA L AA\nTI T IY\nHELLO HH AH L OW\n")
CHORD_TONES = {"maj": (0, 4, 7), "min": (0, 3, 7), "dim": (0, 3, 6), "aug": (0, 4, 8), "sus4": (0, 5, 7),
               "dom7": (0, 4, 7, 10), "maj7": (0, 4, 7, 11), "min7": (0, 3, 7, 10)}


def _sung(*syllables, meta=LeadSheetMeta()):
    notes = [NoteEvent(60, GridPosition(0, 2 * i), 1, s) for i, s in enumerate(syllables)]
    return LeadSheet.build(meta, {TrackKind.VOCAL: notes})


def test_wer_examples():
    assert wer(["la", "la"], ["la", "ti"]) == Fraction(1, 2)
    assert wer(["a", "b", "c"], []) == 1
    assert wer(["x"], ["x"]) == 0
    assert wer(["x"], ["y", "z", "w"]) == 3
    with pytest.raises(EmptyReference):
        wer([], ["x"])


@given(st.lists(st.integers(0, 3), min_size=1, max_size=12), st.lists(st.integers(0, 3), max_size=12))
def test_wer_matches_recursive_oracle(ref, hyp):
    assert wer(ref, hyp) == Fraction(levenshtein(ref, hyp), len(ref))
    assert wer(ref, ref) == 0


def test_lyric_wer_word_unit():
    pq = g2p(LyricPrompt((("verse", "la la"),)), LEX)
    assert lyric_wer(pq, _sung(("L", "AA"), ("T", "IY")), lexicon=LEX) == Fraction(1, 2)
    assert lyric_wer(pq, _sung(("L", "AA"), ("L", "AA")), lexicon=LEX) == 0
    pq = g2p(LyricPrompt((("verse", "hello la"),)), LEX)
    assert lyric_wer(pq, _sung(("HH", "AH"), ("L", "OW"), ("L", "AA")), lexicon=LEX) == 0
    assert lyric_wer(pq, _sung(("HH", "AH"), ("L", "OW")), unit="syllable") == Fraction(1, 3)
    assert lyric_wer(pq, _sung(("HH", "AH"), ("L", "OW")), unit="phoneme") == Fraction(2, 6)


def test_pinyin_defaults_to_syllables():
    pq = g2p(LyricPrompt((("verse", "ni3 hao3"),), "zh-pinyin"))
    assert lyric_wer(pq, _sung(("n", "i"), ("h", "a"))) == Fraction(1, 2)


def test_segment_words():
    prons = {("HH", "AH", "L", "OW"), ("L", "AA")}
    assert segment_words([("HH", "AH"), ("L", "OW"), ("L", "AA")], prons) == [("HH", "AH", "L", "OW"), ("L", "AA")]
    assert segment_words([("X",), ("L", "AA")], prons) == [("X",), ("L", "AA")]


def test_structure_match_examples():
    ls = LeadSheet.build(LeadSheetMeta(sections=(("verse", 0), ("bridge", 4))))
    assert structure_match([("verse", 4), ("chorus", 4)], ls) == (0.5, 0.5)
    assert structure_match(["verse", "bridge"], ls) == (1.0, 1.0)
    assert structure_match(["verse"], LeadSheet.build()) == (0.0, 0.0)
    with pytest.raises(ValueError):
        structure_match([], ls)


def test_scale_and_chord_examples():
    white = LeadSheet.build(tracks={TrackKind.VOCAL: [NoteEvent(p, GridPosition(0, i), 1)
                                                      for i, p in enumerate((60, 62, 64, 65, 67, 69, 71))]})
    assert scale_consistency(white) == 1.0
    fs = LeadSheet.build(tracks={TrackKind.CHORD: [ChordEvent(0, "maj", GridPosition(0, 0), 16)],
                                 TrackKind.VOCAL: [NoteEvent(66, GridPosition(0, 0), 4)]})
    assert chord_tone_rate(fs) == 0.0
    assert scale_consistency(fs) == 0.0
    with pytest.raises(MissingChords):
        chord_tone_rate(white)
    with pytest.raises(MissingKey):
        scale_consistency(LeadSheet(LeadSheetMeta(key=None), (), 1, 16))


def _brute_chord_tone_rate(ls):
    spb = ls.slots_per_bar
    chords = ls.events(TrackKind.CHORD)
    hit = total = 0
    for n in ls.events(TrackKind.VOCAL):
        t = n.onset.bar * spb + n.onset.slot
        if n.onset.slot % 4:
            continue
        sounding = [c for c in chords if c.onset.bar * spb + c.onset.slot <= t < c.onset.bar * spb + c.onset.slot
                    + c.duration]
        if not sounding:
            continue
        c = max(sounding, key=lambda c: c.onset.bar * spb + c.onset.slot)
        total += 1
        hit += n.pitch % 12 in {(c.root + s) % 12 for s in CHORD_TONES[c.quality]}
    return hit / total if total else 1.0


@given(st.integers(0, 10_000))
def test_tonal_metrics_match_brute_force(seed):
    ls = random_sheet(random.Random(seed))
    notes = ls.events(TrackKind.VOCAL)
    tonic, mode = ls.meta.key
    steps = (0, 2, 4, 5, 7, 9, 11) if mode == "major" else (0, 2, 3, 5, 7, 8, 10)
    scale = {(tonic + s) % 12 for s in steps}
    want = sum(n.pitch % 12 in scale for n in notes) / len(notes) if notes else 1.0
    assert scale_consistency(ls) == pytest.approx(want, abs=0)
    if ls.events(TrackKind.CHORD):
        assert chord_tone_rate(ls) == pytest.approx(_brute_chord_tone_rate(ls), abs=0)


def test_evaluate_report(vocab):
    pq = g2p(LyricPrompt((("verse", "la la"),)), LEX)
    ls = _sung(("L", "AA"), ("T", "IY"), meta=LeadSheetMeta(sections=(("verse", 0),)))
    rep = evaluate(ls, vocab, pq, [("verse", 1)], lexicon=LEX)
    d = json.loads(rep.to_json())
    assert d["wer"] == 0.5 and d["wer_fraction"] == "1/2"
    assert d["structure_precision"] == 1.0 and d["grammar_valid"] is True and d["chord_tone_rate"] is None
