"""MIDI events to a quantized lead sheet."""

from __future__ import annotations

import re
import warnings
from collections import defaultdict, deque
from dataclasses import dataclass, replace

from ..core import (
    CHORD_QUALITIES, DRUM_PITCH_RANGE, SECTION_LABELS, TEMPO_RANGE, ChordEvent, GridPosition, InvalidMeta,
    LeadSheet, LeadSheetMeta, NoteEvent, Track, TrackKind, slots_per_bar_for,
)
from ..generator import CHORD_TONES
from .smf import (
    META_KEY_SIG, META_MARKER, MidiEventRaw, NOTE_OFF, NOTE_ON, PROGRAM, TEMPO, TIME_SIG, TRACK_NAME, SmfFile,
    tempo_bpm, time_signature,
)

DRUM_CHANNEL = 9  # channel 10, zero-based
VOCAL_NAME = re.compile(r"vocal|melody|lead", re.I)
CHORD_NAME = re.compile(r"chord", re.I)


class NoNotes(ValueError):
    pass


class IngestWarning(UserWarning):
    pass


def snap(tick: int, division: int) -> int:
    """Nearest sixteenth slot to ``tick``; exact halves go to the earlier slot."""
    q, r = divmod(tick * 4, division)
    return q + (1 if 2 * r > division else 0)


def snap_duration(ticks: int, division: int) -> int:
    return max(1, snap(ticks, division))


def classify(name: str, channel: int, program: int | None) -> TrackKind:
    """Track kind for one (track, channel) stream.

    Channel 10 is drums; a track name containing "chord" is the chord track;
    vocal/melody/lead names are the vocal; then General MIDI program families
    decide, falling back to piano.
    """
    if channel == DRUM_CHANNEL:
        return TrackKind.DRUMS
    if CHORD_NAME.search(name):
        return TrackKind.CHORD
    if VOCAL_NAME.search(name):
        return TrackKind.VOCAL
    if program is not None:
        if 32 <= program <= 39:
            return TrackKind.BASS
        if 24 <= program <= 31:
            return TrackKind.GUITAR
    return TrackKind.PIANO


def match_chord(pitches) -> tuple[int, str]:
    """Root and quality of the template closest to a pitch cluster.

    An exact pitch-class match wins.  Otherwise the template sharing the most
    pitch classes wins, then the one adding fewest extra tones, then ``maj``,
    then a root equal to the lowest note, then the lowest root.
    """
    pcs = {p % 12 for p in pitches}
    bass = min(pitches) % 12
    best = None
    for root in range(12):
        for qi, q in enumerate(CHORD_QUALITIES):
            tmpl = {(root + s) % 12 for s in CHORD_TONES[q]}
            key = (tmpl == pcs, len(tmpl & pcs), -len(tmpl - pcs), q == "maj", root == bass, -root, -qi)
            if best is None or key > best[0]:
                best = (key, root, q)
    return best[1], best[2]


def key_from_signature(data: bytes) -> tuple[int, str]:
    sf = int.from_bytes(data[:1], "big", signed=True)
    minor = len(data) > 1 and data[1] == 1
    return ((sf * 7 + (9 if minor else 0)) % 12, "minor" if minor else "major")


@dataclass(frozen=True)
class RawNote:
    start: int
    end: int
    pitch: int


def _first(events: list[MidiEventRaw], kind: str, meta: int | None = None) -> list[MidiEventRaw]:
    sel = [e for e in events if e.kind == kind and (meta is None or e.meta == meta)]
    return sorted(sel, key=lambda e: e.tick)


def _pair_notes(events) -> dict[int, list[RawNote]]:
    """Note-on/off pairing per channel; an off closes the oldest open note of that pitch."""
    open_: dict[tuple[int, int], deque] = defaultdict(deque)
    out: dict[int, list[RawNote]] = defaultdict(list)
    last = 0
    for e in events:
        last = max(last, e.tick)
        if e.kind == NOTE_ON:
            open_[e.channel, e.data[0]].append(e.tick)
        elif e.kind == NOTE_OFF and open_[e.channel, e.data[0]]:
            start = open_[e.channel, e.data[0]].popleft()
            out[e.channel].append(RawNote(start, e.tick, e.data[0]))
    for (ch, pitch), starts in open_.items():
        for s in starts:
            out[ch].append(RawNote(s, max(last, s), pitch))
    return out


def quantize(smf: SmfFile, lyrics: list[tuple[str, ...]] | None = None) -> LeadSheet:
    """Snap a parsed MIDI file to the sixteenth grid and classify its tracks.

    ``lyrics`` (syllable phoneme lists) are laid on the vocal notes in order.
    """
    div = smf.division
    everything = [e for tr in smf.tracks for e in tr]
    tempos = _first(everything, TEMPO)
    bpm = 120
    if tempos:
        bpm = round(tempo_bpm(tempos[0]))
        if len({e.data for e in tempos}) > 1:
            warnings.warn(IngestWarning("tempo changes ignored; using the first tempo"), stacklevel=2)
        lo, hi = TEMPO_RANGE
        if not lo <= bpm <= hi:
            warnings.warn(IngestWarning(f"tempo {bpm} clamped into [{lo}, {hi}]"), stacklevel=2)
            bpm = min(max(bpm, lo), hi)
    time_sig = (4, 4)
    sigs = _first(everything, TIME_SIG)
    if sigs:
        time_sig = time_signature(sigs[0])
    else:
        warnings.warn(IngestWarning("no time signature; assuming 4/4"), stacklevel=2)
    try:
        spb = slots_per_bar_for(time_sig)
    except InvalidMeta:
        raise InvalidMeta(f"time signature {time_sig[0]}/{time_sig[1]} is not supported") from None
    keys = _first(everything, "Other", META_KEY_SIG)
    if keys:
        key = key_from_signature(keys[0].data)
    else:
        key = (0, "major")
        warnings.warn(IngestWarning("no key signature; assuming C major"), stacklevel=2)

    streams: dict[TrackKind, list[RawNote]] = defaultdict(list)
    for tr in smf.tracks:
        names = [e for e in tr if e.kind == TRACK_NAME]
        name = names[0].data.decode("latin-1") if names else ""
        programs: dict[int, int] = {}
        for e in tr:
            if e.kind == PROGRAM and e.channel not in programs:
                programs[e.channel] = e.data[0]
        for ch, notes in sorted(_pair_notes(tr).items()):
            streams[classify(name, ch, programs.get(ch))].extend(notes)
    if not any(streams.values()):
        raise NoNotes("file contains no notes")

    def pos(tick: int) -> GridPosition:
        s = snap(tick, div)
        return GridPosition(s // spb, s % spb)

    tracks: dict[TrackKind, list] = {}
    for kind, notes in streams.items():
        notes.sort(key=lambda n: (n.start, n.pitch))
        if kind is TrackKind.CHORD:
            clusters: dict[int, list[RawNote]] = defaultdict(list)
            for n in notes:
                clusters[snap(n.start, div)].append(n)
            evs = []
            for s, group in sorted(clusters.items()):
                root, q = match_chord([n.pitch for n in group])
                dur = max(snap_duration(n.end - n.start, div) for n in group)
                evs.append(ChordEvent(root, q, GridPosition(s // spb, s % spb), dur))
            tracks[kind] = evs
            continue
        if kind is TrackKind.DRUMS:
            lo, hi = DRUM_PITCH_RANGE
            kept = [n for n in notes if lo <= n.pitch <= hi]
            if len(kept) < len(notes):
                warnings.warn(IngestWarning(f"{len(notes) - len(kept)} drum notes outside GM percussion dropped"),
                              stacklevel=2)
            notes = kept
        tracks[kind] = [NoteEvent(n.pitch, pos(n.start), snap_duration(n.end - n.start, div)) for n in notes]

    sections = []
    for e in _first(everything, "Other", META_MARKER):
        label = e.data.decode("latin-1").strip().lower()
        if label in SECTION_LABELS:
            bar = snap(e.tick, div) // spb
            if not sections or bar > sections[-1][1]:
                sections.append((label, bar))
    if sections and sections[0][1] != 0:
        sections.insert(0, ("intro", 0))

    ls = LeadSheet.build(LeadSheetMeta(bpm, time_sig, key, tuple(sections)), tracks)
    if lyrics:
        ls = align_lyrics(ls, lyrics)
    return ls


def align_lyrics(ls: LeadSheet, syllables: list[tuple[str, ...]]) -> LeadSheet:
    """One syllable per vocal note in time order; extra syllables are dropped."""
    notes = list(ls.events(TrackKind.VOCAL))
    if len(syllables) > len(notes):
        warnings.warn(IngestWarning(f"{len(syllables) - len(notes)} lyric syllables had no vocal note"),
                      stacklevel=2)
    new = [replace(n, phonemes=tuple(s)) for n, s in zip(notes, syllables)] + notes[len(syllables):]
    tracks = tuple(Track(t.kind, tuple(new)) if t.kind is TrackKind.VOCAL else t for t in ls.tracks)
    return replace(ls, tracks=tracks)
