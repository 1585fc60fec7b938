"""REMI-style lead-sheet tokens: bar-by-bar interleaving of tracks.

Layout::

    BOS Tempo TimeSig Key
    ( Bar [Section] ( Track_k ( Pos [Phon...] Pitch Dur | Pos ChordRoot ChordQual Dur )+ )* )+
    EOS

Tracks appear in the fixed order Chord, Vocal, Bass, Piano, Guitar, Drums and
only in bars where they have an onset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

from .core import (
    TRACK_ORDER,
    ChordEvent,
    GridPosition,
    LeadSheet,
    LeadSheetMeta,
    NoteEvent,
    Track,
    TrackKind,
    slots_per_bar_for,
)
from .grammar import Grammar, Reject
from .vocab import Family, Vocab, VocabMismatch

MAGIC = b"LSTK"
BINARY_VERSION = 1


class EncodeError(ValueError):
    pass


class UnknownPhoneme(EncodeError):
    def __init__(self, symbol: str):
        super().__init__(f"phoneme {symbol!r} not in vocabulary inventory")
        self.symbol = symbol


class TempoOutOfRange(EncodeError):
    pass


class SlotOutOfRange(EncodeError):
    pass


class GrammarError(ValueError):
    def __init__(self, position: int, expected: Sequence[str], reason: str = ""):
        self.position = position
        self.expected = tuple(expected)
        super().__init__(f"token {position}: {reason or 'expected ' + '|'.join(self.expected)}")


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[int, ...]
    vocab_hash: int

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def names(self, vocab: Vocab) -> list[str]:
        check_vocab(self, vocab)
        return [vocab.name(t) for t in self.tokens]

    @classmethod
    def from_names(cls, names: Sequence[str], vocab: Vocab) -> "TokenSeq":
        return cls(tuple(vocab.ids(names)), vocab.hash)


def check_vocab(ts: TokenSeq, vocab: Vocab) -> None:
    if ts.vocab_hash != vocab.hash:
        raise VocabMismatch(f"sequence built for vocab {ts.vocab_hash:016x}, not {vocab.hash_hex}")


def tempo_bucket(bpm: int, vocab: Vocab) -> int:
    cfg = vocab.config
    k = (bpm - cfg.tempo_min) // cfg.tempo_width
    if not 0 <= k < cfg.tempo_buckets:
        hi = cfg.tempo_min + cfg.tempo_width * cfg.tempo_buckets
        raise TempoOutOfRange(f"tempo {bpm} outside [{cfg.tempo_min}, {hi})")
    return k


def bucket_tempo(k: int, vocab: Vocab) -> int:
    """Representative tempo of bucket ``k`` (its lower edge)."""
    return vocab.config.tempo_min + vocab.config.tempo_width * k


def header_tokens(meta: LeadSheetMeta, vocab: Vocab) -> list[int]:
    if tuple(meta.time_sig) not in {vocab.value(t) for t in range(*vocab.range(Family.TIMESIG))}:
        raise EncodeError(f"time signature {meta.time_sig} has no token")
    return [
        vocab.token(Family.BOS),
        vocab.token(Family.TEMPO, tempo_bucket(meta.tempo_bpm, vocab)),
        vocab.token(Family.TIMESIG, tuple(meta.time_sig)),
        vocab.token(Family.KEY, tuple(meta.key)),
    ]


def event_tokens(kind: TrackKind, ev, vocab: Vocab, *, with_pos: bool = True) -> list[int]:
    out = []
    if with_pos:
        if ev.onset.slot >= vocab.config.positions:
            raise SlotOutOfRange(f"slot {ev.onset.slot} has no Pos token")
        out.append(vocab.token(Family.POS, ev.onset.slot))
    if kind is TrackKind.CHORD:
        out.append(vocab.token(Family.CHORD_ROOT, ev.root))
        out.append(vocab.token(Family.CHORD_QUAL, ev.quality))
    else:
        for y in ev.phonemes:
            if not vocab.has(Family.PHON, y):
                raise UnknownPhoneme(y)
            out.append(vocab.token(Family.PHON, y))
        out.append(vocab.token(Family.PITCH, ev.pitch))
    if with_pos:
        out.append(vocab.token(Family.DUR, ev.duration))
    return out


def bars_of(ls: LeadSheet) -> list[dict[TrackKind, list]]:
    """Events grouped per bar and track, in canonical order."""
    bars: list[dict[TrackKind, list]] = [dict() for _ in range(ls.n_bars)]
    for t in ls.tracks:
        for ev in t.events:
            bars[ev.onset.bar].setdefault(t.kind, []).append(ev)
    return bars


def encode(ls: LeadSheet, vocab: Vocab) -> TokenSeq:
    """Encode a normalized lead sheet."""
    toks = header_tokens(ls.meta, vocab)
    sections = dict((start, label) for label, start in ls.meta.sections)
    bar_tok = vocab.token(Family.BAR)
    for b, groups in enumerate(bars_of(ls)):
        toks.append(bar_tok)
        if b in sections:
            toks.append(vocab.token(Family.SECTION, sections[b]))
        for kind in TRACK_ORDER:
            if kind in groups:
                toks.append(vocab.token(Family.TRACK, kind))
                for ev in groups[kind]:
                    toks.extend(event_tokens(kind, ev, vocab))
    toks.append(vocab.token(Family.EOS))
    return TokenSeq(tuple(toks), vocab.hash)


def decode(ts: TokenSeq, vocab: Vocab) -> LeadSheet:
    check_vocab(ts, vocab)
    return decode_ids(ts.tokens, vocab)


def decode_ids(tokens: Sequence[int], vocab: Vocab) -> LeadSheet:
    grammar = Grammar(vocab)
    s = grammar.initial()
    tempo = time_sig = key = None
    sections: list[tuple[str, int]] = []
    events: dict[TrackKind, list] = {}
    bar = -1
    kind = None
    pos = 0
    phonemes: list[str] = []
    pitch = root = quality = None
    for i, tok in enumerate(tokens):
        try:
            s = grammar.step(s, int(tok))
        except Reject as r:
            raise GrammarError(i, r.expected, r.reason) from None
        fam, val = vocab.family(tok), vocab.value(tok)
        if fam is Family.TEMPO:
            tempo = bucket_tempo(val, vocab)
        elif fam is Family.TIMESIG:
            time_sig = val
        elif fam is Family.KEY:
            key = val
        elif fam is Family.BAR:
            bar += 1
        elif fam is Family.SECTION:
            sections.append((val, bar))
        elif fam is Family.TRACK:
            kind = val
        elif fam is Family.POS:
            pos, phonemes = val, []
        elif fam is Family.PHON:
            phonemes.append(val)
        elif fam is Family.PITCH:
            pitch = val
        elif fam is Family.CHORD_ROOT:
            root = val
        elif fam is Family.CHORD_QUAL:
            quality = val
        elif fam is Family.DUR:
            onset = GridPosition(bar, pos)
            if kind is TrackKind.CHORD:
                ev = ChordEvent(root, quality, onset, val)
            else:
                ev = NoteEvent(pitch, onset, val, tuple(phonemes))
            events.setdefault(kind, []).append(ev)
    if not s.terminal:
        raise GrammarError(len(tokens), grammar.expected(s), "sequence ended before EOS")
    meta = LeadSheetMeta(tempo, time_sig, key, tuple(sections))
    tracks = tuple(Track(k, tuple(events[k])) for k in TRACK_ORDER if k in events)
    return LeadSheet(meta, tracks, bar + 1, slots_per_bar_for(time_sig))


# -- serialized forms ---------------------------------------------------------


def to_text(ts: TokenSeq, vocab: Vocab) -> str:
    return " ".join(ts.names(vocab)) + "\n"


def from_text(text: str, vocab: Vocab) -> list[TokenSeq]:
    return [TokenSeq.from_names(line.split(" "), vocab) for line in text.splitlines() if line.strip()]


def to_bytes(ts: TokenSeq) -> bytes:
    head = MAGIC + struct.pack("<HQI", BINARY_VERSION, ts.vocab_hash, len(ts.tokens))
    return head + struct.pack(f"<{len(ts.tokens)}I", *ts.tokens)


def from_bytes(data: bytes) -> TokenSeq:
    if data[:4] != MAGIC:
        raise ValueError("not a token file (bad magic)")
    if len(data) < 18:
        raise ValueError("token file truncated")
    version, vhash, count = struct.unpack_from("<HQI", data, 4)
    if version != BINARY_VERSION:
        raise ValueError(f"unsupported token file version {version}")
    if len(data) != 18 + 4 * count:
        raise ValueError("token file length does not match its count")
    return TokenSeq(struct.unpack_from(f"<{count}I", data, 18), vhash)
