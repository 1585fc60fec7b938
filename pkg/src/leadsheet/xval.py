"""xVal-style encoding: type tokens paired with real values.

Onsets and durations are carried as beat values on ``ONSET`` / ``DUR`` tokens
instead of ``Pos_*`` / ``Dur_*`` tokens, and bar lines are dropped.  Every
other token carries the value 1.0.  Section starts are written as the section
token followed by an ``ONSET`` giving the first beat of that section.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

from .core import TRACK_ORDER, ChordEvent, GridPosition, LeadSheet, LeadSheetMeta, NoteEvent, Track, TrackKind
from .core import normalize, slots_per_bar_for
from .remi import bars_of, bucket_tempo, event_tokens, header_tokens
from .vocab import Family, Vocab, VocabMismatch, content_hash

SLOTS_PER_BEAT = 4
GRID_TOL = 1e-9


class XvalError(ValueError):
    pass


class OffGridValue(XvalError):
    def __init__(self, index: int, value: float):
        super().__init__(f"value {value!r} at token {index} is not on the sixteenth grid")
        self.index = index
        self.value = value


class ValuedToken(NamedTuple):
    id: int
    value: float


class XvalVocab:
    """Reduced vocabulary: REMI minus Pos/Dur families, plus ONSET and DUR."""

    def __init__(self, base: Vocab):
        keep = [i for i in range(base.size) if base.family(i) not in (Family.POS, Family.DUR)]
        self.base = base
        self.names = tuple(base.name(i) for i in keep) + ("ONSET", "DUR")
        self.to_base = tuple(keep) + (-1, -1)
        self.hash = content_hash(self.names)
        self._from_base = {b: i for i, b in enumerate(keep)}
        self._ids = {n: i for i, n in enumerate(self.names)}

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def onset(self) -> int:
        return self.size - 2

    @property
    def dur(self) -> int:
        return self.size - 1

    def from_base(self, tok: int) -> int:
        return self._from_base[tok]

    def name(self, tok: int) -> str:
        return self.names[tok]

    def id(self, name: str) -> int:
        return self._ids[name]


@lru_cache(maxsize=8)
def xval_vocab(base: Vocab) -> XvalVocab:
    return XvalVocab(base)


@dataclass(frozen=True)
class ValuedTokenSeq:
    pairs: tuple[ValuedToken, ...]
    vocab_hash: int

    def __len__(self) -> int:
        return len(self.pairs)


def beats_per_bar(ls_or_ts) -> float:
    ts = ls_or_ts.meta.time_sig if isinstance(ls_or_ts, LeadSheet) else ls_or_ts
    return slots_per_bar_for(ts) / SLOTS_PER_BEAT


def encode_xval(ls: LeadSheet, vocab: Vocab) -> ValuedTokenSeq:
    xv = xval_vocab(vocab)
    spb = ls.slots_per_bar
    out: list[ValuedToken] = []

    def plain(base_tok: int):
        out.append(ValuedToken(xv.from_base(base_tok), 1.0))

    for t in header_tokens(ls.meta, vocab):
        plain(t)
    sections = {start: label for label, start in ls.meta.sections}
    for b, groups in enumerate(bars_of(ls)):
        if b in sections:
            plain(vocab.token(Family.SECTION, sections[b]))
            out.append(ValuedToken(xv.onset, b * spb / SLOTS_PER_BEAT))
        for kind in TRACK_ORDER:
            if kind not in groups:
                continue
            plain(vocab.token(Family.TRACK, kind))
            for ev in groups[kind]:
                out.append(ValuedToken(xv.onset, ev.onset.absolute(spb) / SLOTS_PER_BEAT))
                for t in event_tokens(kind, ev, vocab, with_pos=False):
                    plain(t)
                out.append(ValuedToken(xv.dur, ev.duration / SLOTS_PER_BEAT))
    plain(vocab.token(Family.EOS))
    return ValuedTokenSeq(tuple(out), xv.hash)


def _to_slots(index: int, value: float, snap: bool) -> int:
    if not math.isfinite(value):
        raise XvalError(f"non-finite value at token {index}")
    x = value * SLOTS_PER_BEAT
    if snap:
        return math.ceil(x - 0.5)
    k = round(x)
    if abs(value - k / SLOTS_PER_BEAT) > GRID_TOL:
        raise OffGridValue(index, value)
    return k


def decode_xval(vs: ValuedTokenSeq, vocab: Vocab, snap: bool = False) -> LeadSheet:
    """Inverse of :func:`encode_xval`.

    With ``snap`` off, every onset and duration must lie on the grid.  With it
    on, values round to the nearest slot, ties going earlier (onsets) or
    shorter (durations).
    """
    xv = xval_vocab(vocab)
    if vs.vocab_hash != xv.hash:
        raise VocabMismatch("xVal sequence built for a different vocabulary")
    pairs = vs.pairs
    if len(pairs) < 5:
        raise XvalError("sequence shorter than its header")
    head = []
    for i in range(4):
        tok, value = pairs[i]
        if not 0 <= tok < xv.size or xv.to_base[tok] < 0:
            raise XvalError(f"header token {i} is numeric")
        head.append((vocab.family(xv.to_base[tok]), vocab.value(xv.to_base[tok])))
    fams = [f for f, _ in head]
    if fams != [Family.BOS, Family.TEMPO, Family.TIMESIG, Family.KEY]:
        raise XvalError("bad header")
    time_sig = head[2][1]
    spb = slots_per_bar_for(time_sig)
    sections: list[tuple[str, int]] = []
    events: dict[TrackKind, list] = {}
    kind: TrackKind | None = None
    i = 4
    n = len(pairs)

    def read(expect_numeric: int | None = None) -> tuple[int, float]:
        nonlocal i
        if i >= n:
            raise XvalError("unexpected end of sequence")
        tok, value = pairs[i]
        if not 0 <= tok < xv.size:
            raise XvalError(f"token id {tok} outside vocabulary at {i}")
        if expect_numeric is not None and tok != expect_numeric:
            raise XvalError(f"expected {xv.name(expect_numeric)} at token {i}, got {xv.name(tok)}")
        if xv.to_base[tok] >= 0 and value != 1.0:
            raise XvalError(f"non-numeric token {xv.name(tok)} must carry 1.0")
        i += 1
        return tok, value

    while True:
        tok, _ = read()
        if tok in (xv.onset, xv.dur):
            if kind is None:
                raise XvalError(f"numeric token before any track at {i - 1}")
            onset = _to_slots(i - 1, pairs[i - 1].value, snap)
            if onset < 0:
                raise XvalError(f"negative onset at {i - 1}")
            if tok != xv.onset:
                raise XvalError(f"event must start with ONSET at {i - 1}")
            phonemes: list[str] = []
            t2, _ = read()
            base = xv.to_base[t2]
            if kind is TrackKind.CHORD:
                if base < 0 or vocab.family(base) is not Family.CHORD_ROOT:
                    raise XvalError(f"expected ChordRoot at {i - 1}")
                root = vocab.value(base)
                t3, _ = read()
                if xv.to_base[t3] < 0 or vocab.family(xv.to_base[t3]) is not Family.CHORD_QUAL:
                    raise XvalError(f"expected ChordQual at {i - 1}")
                quality = vocab.value(xv.to_base[t3])
            else:
                while base >= 0 and vocab.family(base) is Family.PHON and kind is TrackKind.VOCAL:
                    phonemes.append(vocab.value(base))
                    t2, _ = read()
                    base = xv.to_base[t2]
                if base < 0 or vocab.family(base) is not Family.PITCH:
                    raise XvalError(f"expected Pitch at {i - 1}")
                pitch = vocab.value(base)
            read(xv.dur)
            dur = max(1, _to_slots(i - 1, pairs[i - 1].value, snap))
            pos = GridPosition(onset // spb, onset % spb)
            ev = ChordEvent(root, quality, pos, dur) if kind is TrackKind.CHORD else NoteEvent(
                pitch, pos, dur, tuple(phonemes))
            events.setdefault(kind, []).append(ev)
            continue
        fam = vocab.family(xv.to_base[tok])
        val = vocab.value(xv.to_base[tok])
        if fam is Family.EOS:
            break
        if fam is Family.TRACK:
            kind = val
        elif fam is Family.SECTION:
            read(xv.onset)
            start = _to_slots(i - 1, pairs[i - 1].value, snap)
            if start % spb:
                raise XvalError(f"section onset at token {i - 1} is not on a bar line")
            sections.append((val, start // spb))
        else:
            raise XvalError(f"unexpected {xv.name(tok)} at token {i - 1}")
    if i != n:
        raise XvalError("tokens after EOS")
    meta = LeadSheetMeta(bucket_tempo(head[1][1], vocab), time_sig, head[3][1], tuple(sections))
    tracks = tuple(Track(k, tuple(events[k])) for k in TRACK_ORDER if k in events)
    return normalize(LeadSheet(meta, tracks, 1, spb))


def to_text(vs: ValuedTokenSeq, vocab: Vocab) -> str:
    xv = xval_vocab(vocab)
    return "".join(f"{xv.name(t)}\t{v:.9f}\n" for t, v in vs.pairs)


def from_text(text: str, vocab: Vocab) -> ValuedTokenSeq:
    xv = xval_vocab(vocab)
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            name, value = line.split("\t")
            pairs.append(ValuedToken(xv.id(name), float(value)))
        except (ValueError, KeyError):
            raise XvalError(f"line {lineno}: expected '<token>\\t<value>'") from None
    return ValuedTokenSeq(tuple(pairs), xv.hash)
