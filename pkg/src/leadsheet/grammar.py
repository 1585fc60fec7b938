"""Finite-state automaton over REMI token ids.

The automaton accepts exactly the canonical encodings of lead sheets, so a
sequence it accepts always decodes, and :func:`Grammar.mask` can drive
constrained decoding.  Only structure is checked here (token order, families,
monotonic positions, pitch ranges per track); tonal preferences live in the
generator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .core import DRUM_PITCH_RANGE, TRACK_ORDER, TrackKind, slots_per_bar_for
from .vocab import Family, Vocab


class Phase(enum.IntEnum):
    EXPECT_BOS = 0
    EXPECT_TEMPO = 1
    EXPECT_TIMESIG = 2
    EXPECT_KEY = 3
    EXPECT_BAR_OR_EOS = 4
    IN_BAR = 5
    IN_TRACK = 6
    EXPECT_PITCH = 7
    EXPECT_CHORD_QUAL = 8
    EXPECT_DUR = 9
    DONE = 10


@dataclass(frozen=True)
class GrammarState:
    phase: Phase = Phase.EXPECT_BOS
    kind: TrackKind | None = None
    last_track_rank: int = -1
    last_pos: int = -1
    last_pitch: int = -1
    bars_seen: int = 0
    slots: int = 16
    has_sections: bool = False
    section_open: bool = False

    @property
    def terminal(self) -> bool:
        return self.phase is Phase.DONE


class Reject(Exception):
    """Raised by :meth:`Grammar.step` for a token the state cannot accept."""

    def __init__(self, expected: Sequence[str], got: str, reason: str = ""):
        self.expected = tuple(expected)
        self.got = got
        self.reason = reason or f"expected {'|'.join(self.expected) or 'nothing'}, got {got}"
        super().__init__(self.reason)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    index: int | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.accepted


def pitch_ceiling(kind: TrackKind) -> int:
    """Largest pitch-like value (pitch, or chord root) allowed on a track."""
    if kind is TrackKind.CHORD:
        return 11
    if kind is TrackKind.DRUMS:
        return DRUM_PITCH_RANGE[1]
    return 127


def pitch_floor(kind: TrackKind) -> int:
    return DRUM_PITCH_RANGE[0] if kind is TrackKind.DRUMS else 0


_EXPECTED = {
    Phase.EXPECT_BOS: ("BOS",),
    Phase.EXPECT_TEMPO: ("Tempo",),
    Phase.EXPECT_TIMESIG: ("TimeSig",),
    Phase.EXPECT_KEY: ("Key",),
    Phase.EXPECT_BAR_OR_EOS: ("Bar",),
    Phase.IN_BAR: ("Section", "Track", "Bar", "EOS"),
    Phase.IN_TRACK: ("Pos", "Track", "Bar", "EOS"),
    Phase.EXPECT_CHORD_QUAL: ("ChordQual",),
    Phase.EXPECT_DUR: ("Dur",),
    Phase.DONE: (),
}


class Grammar:
    """Validity automaton bound to one vocabulary."""

    def __init__(self, vocab: Vocab):
        self.vocab = vocab
        self.size = vocab.size

    def initial(self) -> GrammarState:
        return GrammarState()

    def expected(self, s: GrammarState) -> tuple[str, ...]:
        if s.phase is Phase.EXPECT_PITCH:
            if s.kind is TrackKind.CHORD:
                return ("ChordRoot",)
            if s.kind is TrackKind.VOCAL:
                return ("Phon", "Pitch")
            return ("Pitch",)
        if s.phase is Phase.IN_TRACK and s.last_pos < 0:
            return ("Pos",)
        return _EXPECTED[s.phase]

    def _can_repeat_pos(self, s: GrammarState) -> bool:
        return s.last_pitch < pitch_ceiling(s.kind)

    def step(self, s: GrammarState, tok: int) -> GrammarState:
        v = self.vocab
        if not 0 <= tok < self.size:
            raise Reject(self.expected(s), f"<id {tok}>", f"token id {tok} outside vocabulary")
        fam = v.family(tok)
        val = v.value(tok)
        name = v.name(tok)

        def reject(reason: str = ""):
            return Reject(self.expected(s), name, reason)

        ph = s.phase
        if ph is Phase.EXPECT_BOS:
            if fam is Family.BOS:
                return replace(s, phase=Phase.EXPECT_TEMPO)
        elif ph is Phase.EXPECT_TEMPO:
            if fam is Family.TEMPO:
                return replace(s, phase=Phase.EXPECT_TIMESIG)
        elif ph is Phase.EXPECT_TIMESIG:
            if fam is Family.TIMESIG:
                slots = min(slots_per_bar_for(val), v.config.positions)
                return replace(s, phase=Phase.EXPECT_KEY, slots=slots)
        elif ph is Phase.EXPECT_KEY:
            if fam is Family.KEY:
                return replace(s, phase=Phase.EXPECT_BAR_OR_EOS)
        elif ph is Phase.EXPECT_BAR_OR_EOS:
            if fam is Family.BAR:
                return self._open_bar(s)
        elif ph is Phase.IN_BAR or (ph is Phase.IN_TRACK and s.last_pos >= 0):
            if fam is Family.SECTION:
                if ph is Phase.IN_BAR and s.section_open:
                    return replace(s, section_open=False, has_sections=True)
                raise reject("section marker only allowed right after the bar line where sections begin")
            if fam is Family.TRACK:
                if val.rank > s.last_track_rank:
                    return replace(s, phase=Phase.IN_TRACK, kind=val, last_track_rank=val.rank,
                                   last_pos=-1, last_pitch=-1, section_open=False)
                raise reject("track markers must increase in rank within a bar")
            if fam is Family.BAR:
                return self._open_bar(s)
            if fam is Family.EOS:
                return GrammarState(Phase.DONE, bars_seen=s.bars_seen, slots=s.slots,
                                    has_sections=s.has_sections)
            if fam is Family.POS and ph is Phase.IN_TRACK:
                return self._pos(s, val, reject)
        elif ph is Phase.IN_TRACK:
            if fam is Family.POS:
                return self._pos(s, val, reject)
        elif ph is Phase.EXPECT_PITCH:
            if s.kind is TrackKind.CHORD:
                if fam is Family.CHORD_ROOT:
                    if val > s.last_pitch:
                        return replace(s, phase=Phase.EXPECT_CHORD_QUAL, last_pitch=val)
                    raise reject("chord roots at one position must increase")
            else:
                if fam is Family.PHON and s.kind is TrackKind.VOCAL:
                    return s
                if fam is Family.PITCH:
                    if not pitch_floor(s.kind) <= val <= pitch_ceiling(s.kind):
                        raise reject(f"pitch {val} outside {s.kind.value} range")
                    if val > s.last_pitch:
                        return replace(s, phase=Phase.EXPECT_DUR, last_pitch=val)
                    raise reject("pitches at one position must increase")
        elif ph is Phase.EXPECT_CHORD_QUAL:
            if fam is Family.CHORD_QUAL:
                return replace(s, phase=Phase.EXPECT_DUR)
        elif ph is Phase.EXPECT_DUR:
            if fam is Family.DUR:
                return replace(s, phase=Phase.IN_TRACK)
        raise reject()

    def _open_bar(self, s: GrammarState) -> GrammarState:
        first = s.bars_seen == 0
        return replace(s, phase=Phase.IN_BAR, kind=None, last_track_rank=-1, last_pos=-1,
                       last_pitch=-1, bars_seen=s.bars_seen + 1,
                       section_open=first or s.has_sections)

    def _pos(self, s: GrammarState, p: int, reject) -> GrammarState:
        if p >= s.slots:
            raise reject(f"position {p} beyond bar of {s.slots} slots")
        if p < s.last_pos:
            raise reject("position decreased within track")
        if p == s.last_pos:
            if not self._can_repeat_pos(s):
                raise reject("no pitch left above the previous one at this position")
            return replace(s, phase=Phase.EXPECT_PITCH)
        return replace(s, phase=Phase.EXPECT_PITCH, last_pos=p, last_pitch=-1)

    def mask(self, s: GrammarState) -> np.ndarray:
        """Boolean vector of token ids accepted in state ``s``."""
        v = self.vocab
        m = np.zeros(self.size, dtype=bool)

        def allow(fam: Family, lo_val: int | None = None, hi_val: int | None = None):
            lo, hi = v.range(fam)
            if lo_val is None:
                m[lo:hi] = True
                return
            first = v.value(lo)
            m[max(lo, lo + lo_val - first):min(hi, lo + hi_val - first + 1)] = True

        ph = s.phase
        if ph is Phase.EXPECT_BOS:
            allow(Family.BOS)
        elif ph is Phase.EXPECT_TEMPO:
            allow(Family.TEMPO)
        elif ph is Phase.EXPECT_TIMESIG:
            allow(Family.TIMESIG)
        elif ph is Phase.EXPECT_KEY:
            allow(Family.KEY)
        elif ph is Phase.EXPECT_BAR_OR_EOS:
            allow(Family.BAR)
        elif ph is Phase.IN_BAR or (ph is Phase.IN_TRACK and s.last_pos >= 0):
            if ph is Phase.IN_BAR and s.section_open:
                allow(Family.SECTION)
            lo, _ = v.range(Family.TRACK)
            m[lo + s.last_track_rank + 1:lo + len(TRACK_ORDER)] = True
            allow(Family.BAR)
            allow(Family.EOS)
            if ph is Phase.IN_TRACK:
                first = s.last_pos if self._can_repeat_pos(s) else s.last_pos + 1
                allow(Family.POS, first, s.slots - 1)
        elif ph is Phase.IN_TRACK:
            allow(Family.POS, 0, s.slots - 1)
        elif ph is Phase.EXPECT_PITCH:
            if s.kind is TrackKind.CHORD:
                allow(Family.CHORD_ROOT, s.last_pitch + 1, 11)
            else:
                if s.kind is TrackKind.VOCAL:
                    allow(Family.PHON)
                allow(Family.PITCH, max(pitch_floor(s.kind), s.last_pitch + 1), pitch_ceiling(s.kind))
        elif ph is Phase.EXPECT_CHORD_QUAL:
            allow(Family.CHORD_QUAL)
        elif ph is Phase.EXPECT_DUR:
            allow(Family.DUR)
        return m

    def run(self, tokens: Iterable[int], state: GrammarState | None = None) -> GrammarState:
        s = state or self.initial()
        for t in tokens:
            s = self.step(s, t)
        return s

    def validate(self, tokens: Sequence[int]) -> Verdict:
        s = self.initial()
        for i, t in enumerate(tokens):
            try:
                s = self.step(s, int(t))
            except Reject as r:
                return Verdict(False, i, r.reason)
        if not s.terminal:
            return Verdict(False, len(tokens), f"sequence ended early; expected {'|'.join(self.expected(s))}")
        return Verdict(True)
