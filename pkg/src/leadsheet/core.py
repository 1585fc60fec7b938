"""Canonical lead-sheet data model.

A :class:`LeadSheet` is a metadata header plus at most one :class:`Track` per
instrument kind, each holding timed events on a sixteenth-note grid.  All
types are frozen; every operation returns a new object.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

MAX_DURATION = 64
DRUM_PITCH_RANGE = (35, 81)
TEMPO_RANGE = (40, 240)

CHORD_QUALITIES = ("maj", "min", "dim", "aug", "dom7", "maj7", "min7", "sus4")
SECTION_LABELS = ("intro", "verse", "pre-chorus", "chorus", "bridge", "inst", "outro")
MODES = ("major", "minor")
TIME_SIG_DENOMINATORS = (2, 4, 8)


class TrackKind(str, enum.Enum):
    CHORD = "Chord"
    VOCAL = "Vocal"
    BASS = "Bass"
    PIANO = "Piano"
    GUITAR = "Guitar"
    DRUMS = "Drums"

    @property
    def rank(self) -> int:
        return TRACK_ORDER.index(self)

    @classmethod
    def parse(cls, name: str) -> "TrackKind":
        for kind in cls:
            if kind.value.lower() == name.strip().lower():
                return kind
        raise ValueError(f"unknown track kind {name!r}")


TRACK_ORDER = tuple(TrackKind)


class LeadSheetError(ValueError):
    """Base class for invalid lead-sheet content."""


class InvalidEvent(LeadSheetError):
    def __init__(self, message: str, kind: TrackKind | None = None, index: int | None = None):
        where = f" ({kind.value} event {index})" if kind is not None else ""
        super().__init__(message + where)
        self.kind = kind
        self.index = index


class InvalidPitch(InvalidEvent):
    pass


class InvalidSlot(InvalidEvent):
    pass


class InvalidDuration(InvalidEvent):
    pass


class InvalidMeta(LeadSheetError):
    pass


@dataclass(frozen=True, order=True)
class GridPosition:
    bar: int
    slot: int

    def absolute(self, slots_per_bar: int) -> int:
        return self.bar * slots_per_bar + self.slot


@dataclass(frozen=True)
class NoteEvent:
    pitch: int
    onset: GridPosition
    duration: int
    phonemes: tuple[str, ...] = ()

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (self.onset.bar, self.onset.slot, self.pitch)

    @property
    def identity(self) -> tuple[int, int, int]:
        return self.sort_key


@dataclass(frozen=True)
class ChordEvent:
    root: int
    quality: str
    onset: GridPosition
    duration: int

    @property
    def sort_key(self) -> tuple[int, int, int, int]:
        return (self.onset.bar, self.onset.slot, self.root, CHORD_QUALITIES.index(self.quality))

    @property
    def identity(self) -> tuple[int, int, int]:
        return (self.onset.bar, self.onset.slot, self.root)


Event = Union[NoteEvent, ChordEvent]


@dataclass(frozen=True)
class Track:
    kind: TrackKind
    events: tuple[Event, ...] = ()


@dataclass(frozen=True)
class LeadSheetMeta:
    tempo_bpm: int = 120
    time_sig: tuple[int, int] = (4, 4)
    key: tuple[int, str] = (0, "major")
    sections: tuple[tuple[str, int], ...] = ()


def slots_per_bar_for(time_sig: tuple[int, int]) -> int:
    """Sixteenth-note slots in one bar of ``time_sig`` (16 for 4/4)."""
    num, den = time_sig
    slots = 16 * num // den
    if slots * den != 16 * num or slots < 1:
        raise InvalidMeta(f"time signature {num}/{den} does not fit the sixteenth grid")
    return slots


@dataclass(frozen=True)
class LeadSheet:
    meta: LeadSheetMeta = field(default_factory=LeadSheetMeta)
    tracks: tuple[Track, ...] = ()
    n_bars: int = 1
    slots_per_bar: int = 16

    def track(self, kind: TrackKind) -> Track | None:
        for t in self.tracks:
            if t.kind is kind:
                return t
        return None

    def events(self, kind: TrackKind) -> tuple[Event, ...]:
        t = self.track(kind)
        return t.events if t is not None else ()

    @property
    def kinds(self) -> tuple[TrackKind, ...]:
        return tuple(t.kind for t in self.tracks)

    @classmethod
    def build(
        cls,
        meta: LeadSheetMeta | None = None,
        tracks: dict[TrackKind, Iterable[Event]] | None = None,
        n_bars: int = 1,
    ) -> "LeadSheet":
        """Convenience constructor; the result is normalized."""
        meta = meta or LeadSheetMeta()
        ts = tuple(Track(k, tuple(ev)) for k, ev in (tracks or {}).items())
        return normalize(cls(meta, ts, n_bars, slots_per_bar_for(meta.time_sig)))


def _check_meta(meta: LeadSheetMeta) -> None:
    lo, hi = TEMPO_RANGE
    if not lo <= meta.tempo_bpm <= hi:
        raise InvalidMeta(f"tempo {meta.tempo_bpm} outside [{lo}, {hi}]")
    num, den = meta.time_sig
    if den not in TIME_SIG_DENOMINATORS or num < 1:
        raise InvalidMeta(f"unsupported time signature {num}/{den}")
    tonic, mode = meta.key
    if not 0 <= tonic < 12 or mode not in MODES:
        raise InvalidMeta(f"invalid key {meta.key!r}")
    prev = -1
    for i, (label, start) in enumerate(meta.sections):
        if label not in SECTION_LABELS:
            raise InvalidMeta(f"unknown section label {label!r}")
        if start <= prev or (i == 0 and start != 0):
            raise InvalidMeta("sections must start at bar 0 and strictly increase")
        prev = start


def _check_event(ev: Event, kind: TrackKind, index: int, slots_per_bar: int) -> Event:
    if ev.onset.bar < 0 or not 0 <= ev.onset.slot < slots_per_bar:
        raise InvalidSlot(f"onset {ev.onset} outside grid", kind, index)
    if ev.duration < 1:
        raise InvalidDuration(f"duration {ev.duration} < 1", kind, index)
    if kind is TrackKind.CHORD:
        if not isinstance(ev, ChordEvent):
            raise InvalidEvent("Chord track holds only chord events", kind, index)
        if not 0 <= ev.root < 12 or ev.quality not in CHORD_QUALITIES:
            raise InvalidEvent(f"bad chord {ev.root}:{ev.quality}", kind, index)
    else:
        if not isinstance(ev, NoteEvent):
            raise InvalidEvent("note tracks hold only note events", kind, index)
        lo, hi = DRUM_PITCH_RANGE if kind is TrackKind.DRUMS else (0, 127)
        if not lo <= ev.pitch <= hi:
            raise InvalidPitch(f"pitch {ev.pitch} outside [{lo}, {hi}]", kind, index)
        if ev.phonemes and kind is not TrackKind.VOCAL:
            raise InvalidEvent("phonemes only allowed on the Vocal track", kind, index)
    if ev.duration > MAX_DURATION:
        ev = replace(ev, duration=MAX_DURATION)
    return ev


def _canonical_events(kind: TrackKind, events: Iterable[Event], slots_per_bar: int) -> tuple[Event, ...]:
    merged: dict[tuple, Event] = {}
    for i, ev in enumerate(events):
        ev = _check_event(ev, kind, i, slots_per_bar)
        key = ev.identity
        kept = merged.get(key)
        if kept is None or ev.duration > kept.duration:
            merged[key] = ev
    return tuple(sorted(merged.values(), key=lambda e: e.sort_key))


def normalize(ls: LeadSheet) -> LeadSheet:
    """Return the canonical form of ``ls``.

    Events are range-checked, sorted by (onset, pitch), and duplicates at the
    same (onset, pitch) are merged keeping the longest.  Durations above 64
    slots are clamped.  ``n_bars`` becomes one past the last bar that holds an
    event onset or a section start.  Tracks without events are dropped.
    """
    _check_meta(ls.meta)
    spb = slots_per_bar_for(ls.meta.time_sig)
    seen: set[TrackKind] = set()
    tracks = []
    last_bar = max((start for _, start in ls.meta.sections), default=0)
    for t in ls.tracks:
        if t.kind in seen:
            raise LeadSheetError(f"duplicate {t.kind.value} track")
        seen.add(t.kind)
        events = _canonical_events(t.kind, t.events, spb)
        if events:
            last_bar = max(last_bar, max(e.onset.bar for e in events))
            tracks.append(Track(t.kind, events))
    tracks.sort(key=lambda t: t.kind.rank)
    return LeadSheet(ls.meta, tuple(tracks), last_bar + 1, spb)


def select_stems(ls: LeadSheet, kinds: Iterable[TrackKind]) -> LeadSheet:
    kinds = set(kinds)
    if not kinds:
        raise ValueError("select_stems needs at least one track kind")
    return replace(ls, tracks=tuple(t for t in ls.tracks if t.kind in kinds))


@dataclass(frozen=True)
class Diff:
    """Structural difference between two lead sheets."""

    added: dict[TrackKind, tuple[Event, ...]] = field(default_factory=dict)
    removed: dict[TrackKind, tuple[Event, ...]] = field(default_factory=dict)
    meta: tuple[tuple[str, object, object], ...] = ()

    def __bool__(self) -> bool:
        return bool(self.added or self.removed or self.meta)

    @property
    def is_empty(self) -> bool:
        return not self

    def restrict(self, keep) -> "Diff":
        """Keep only event changes for which ``keep(kind, event)`` is true."""

        def filt(d):
            out = {}
            for k, evs in d.items():
                sel = tuple(e for e in evs if keep(k, e))
                if sel:
                    out[k] = sel
            return out

        return Diff(filt(self.added), filt(self.removed), self.meta)


def compare(a: LeadSheet, b: LeadSheet) -> Diff:
    meta = []
    for name in ("tempo_bpm", "time_sig", "key", "sections"):
        va, vb = getattr(a.meta, name), getattr(b.meta, name)
        if va != vb:
            meta.append((name, va, vb))
    for name in ("n_bars", "slots_per_bar"):
        va, vb = getattr(a, name), getattr(b, name)
        if va != vb:
            meta.append((name, va, vb))
    added, removed = {}, {}
    for kind in TRACK_ORDER:
        ea, eb = a.events(kind), b.events(kind)
        sa, sb = set(ea), set(eb)
        rem = tuple(e for e in ea if e not in sb)
        add = tuple(e for e in eb if e not in sa)
        if rem:
            removed[kind] = rem
        if add:
            added[kind] = add
    return Diff(added, removed, tuple(meta))
