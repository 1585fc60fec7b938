import random
import warnings
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from leadsheet.core import GridPosition, NoteEvent, Track, TrackKind
from leadsheet.generator import CHORD_TONES
from leadsheet.ingest.quantize import (
    IngestWarning, NoNotes, align_lyrics, classify, key_from_signature, match_chord, quantize, snap,
)
from leadsheet.ingest.smf import parse_smf
from sheets import midi_representable, random_sheet
from smf_writer import SHARPS_FOR_MAJOR, header, key_sig, name, note_off, note_on, program, render, tempo, time_sig, \
    track_chunk


def _strip(ls):
    return replace(ls, tracks=tuple(Track(t.kind, tuple(replace(e, phonemes=()) if isinstance(e, NoteEvent) else e
                                                        for e in t.events)) for t in ls.tracks))


def _single_note_file(tick, division=96, extra=()):
    extra = [(0, key_sig(0, False)), *extra]
    conductor = track_chunk([(0, tempo(100)), (0, time_sig(4, 4)), *extra])
    notes = track_chunk([(0, name("melody")), (tick, note_on(0, 60)), (tick + division, note_off(0, 60))])
    return header(1, 2, division) + conductor + notes


def test_quarter_note_is_slot_4():
    ls = quantize(parse_smf(_single_note_file(96)))
    (n,) = ls.events(TrackKind.VOCAL)
    assert n.onset == GridPosition(0, 4) and n.duration == 4


def test_tie_goes_earlier():
    assert snap(12, 96) == 0  # half a slot
    assert snap(13, 96) == 1
    ls = quantize(parse_smf(_single_note_file(12 + 24)))
    assert ls.events(TrackKind.VOCAL)[0].onset == GridPosition(0, 1)


@given(st.integers(0, 10_000), st.sampled_from([24, 96, 120, 480, 960]))
def test_snap_oracle(tick, div):
    exact = tick * 4 / div
    s = snap(tick, div)
    assert abs(s - exact) <= 0.5
    if abs(s - exact) == 0.5:
        assert s < exact


def _template_oracle(pcs):
    exact = [(r, q) for q in CHORD_TONES for r in range(12) if {(r + s) % 12 for s in CHORD_TONES[q]} == pcs]
    return exact


def test_chord_templates():
    assert match_chord([60, 64, 67]) == (0, "maj")
    assert match_chord([57, 60, 64]) == (9, "min")
    assert match_chord([55, 59, 62, 65]) == (7, "dom7")
    for q, steps in CHORD_TONES.items():
        for r in range(12):
            pitches = [48 + r + s for s in steps]
            assert match_chord(pitches) == (r, q)
            assert (r, q) in _template_oracle({p % 12 for p in pitches})
    assert match_chord([60, 62]) == (7, "sus4")  # most shared pitch classes wins
    assert match_chord([60]) == (0, "maj")  # tie on intersection goes to maj


def test_classify():
    assert classify("anything", 9, 33) is TrackKind.DRUMS
    assert classify("Chords", 0, 33) is TrackKind.CHORD
    assert classify("LEAD", 0, None) is TrackKind.VOCAL
    assert classify("", 2, 33) is TrackKind.BASS
    assert classify("", 2, 26) is TrackKind.GUITAR
    assert classify("", 2, 3) is TrackKind.PIANO
    assert classify("strings", 2, 48) is TrackKind.PIANO


def test_key_signature():
    for tonic, sf in SHARPS_FOR_MAJOR.items():
        assert key_from_signature(bytes([sf & 0xFF, 0])) == (tonic, "major")
    assert key_from_signature(bytes([0, 1])) == (9, "minor")


def test_defaults_warn():
    conductor = track_chunk([])
    notes = track_chunk([(0, note_on(0, 60)), (96, note_off(0, 60))])
    with pytest.warns(IngestWarning):
        ls = quantize(parse_smf(header(1, 2, 96) + conductor + notes))
    assert ls.meta.time_sig == (4, 4) and ls.meta.key == (0, "major") and ls.meta.tempo_bpm == 120


def test_tempo_changes_warn():
    data = _single_note_file(0, extra=[(96, tempo(140))])
    with pytest.warns(IngestWarning, match="tempo"):
        assert quantize(parse_smf(data)).meta.tempo_bpm == 100


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_no_notes():
    with pytest.raises(NoNotes):
        quantize(parse_smf(header(0, 1, 96) + track_chunk([(0, tempo(120))])))


def test_drums_out_of_range_dropped():
    body = track_chunk([(0, note_on(9, 20)), (10, note_off(9, 20)), (0, note_on(9, 36)), (10, note_off(9, 36))])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ls = quantize(parse_smf(header(0, 1, 96) + body))
    assert [e.pitch for e in ls.events(TrackKind.DRUMS)] == [36]


def test_unclosed_note_ends_at_last_tick():
    body = track_chunk([(0, program(0, 0)), (0, note_on(0, 60)), (48, note_on(0, 62)), (96, note_off(0, 62))])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ls = quantize(parse_smf(header(0, 1, 96) + body))
    assert [(e.pitch, e.duration) for e in ls.events(TrackKind.PIANO)] == [(60, 4), (62, 2)]


def test_align_lyrics(toy_sheets):
    ls = _strip(toy_sheets[0])
    syl = [("L", "AA"), ("T", "IY")]
    out = align_lyrics(ls, syl)
    assert [e.phonemes for e in out.events(TrackKind.VOCAL)][:3] == [("L", "AA"), ("T", "IY"), ()]


def _quiet_quantize(data):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return quantize(parse_smf(data))


@given(st.integers(0, 100_000), st.booleans())
def test_render_quantize_round_trip(seed, running_status):
    ls = midi_representable(random_sheet(random.Random(seed)))
    if not any(t.events for t in ls.tracks):
        return
    once = _quiet_quantize(render(ls, running_status=running_status))
    assert once == replace(_strip(ls), n_bars=once.n_bars)
    assert _quiet_quantize(render(once)) == once


def test_toy_songs_survive_midi(toy_sheets):
    for ls in toy_sheets:
        assert _quiet_quantize(render(ls, division=480)) == _strip(ls)
