"""Standard MIDI File reader (formats 0 and 1, PPQ timing)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class SmfError(ValueError):
    pass


class BadMagic(SmfError):
    def __init__(self, offset: int, found: bytes):
        super().__init__(f"expected MThd at offset {offset}, found {found!r}")
        self.offset = offset


class TruncatedChunk(SmfError):
    def __init__(self, offset: int, what: str = "chunk"):
        super().__init__(f"truncated {what} at offset {offset}")
        self.offset = offset


class BadVLQ(SmfError):
    def __init__(self, offset: int):
        super().__init__(f"variable-length quantity longer than 4 bytes at offset {offset}")
        self.offset = offset


class UnsupportedFormat(SmfError):
    def __init__(self, fmt: int):
        super().__init__(f"SMF format {fmt} is not supported")
        self.format = fmt


class UnsupportedDivision(SmfError):
    pass


class BadHeader(SmfError):
    pass


class BadEvent(SmfError):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"bad event at offset {offset}: {reason}")
        self.offset = offset


NOTE_ON = "NoteOn"
NOTE_OFF = "NoteOff"
TEMPO = "Tempo"
TIME_SIG = "TimeSig"
TRACK_NAME = "TrackName"
PROGRAM = "ProgramChange"
OTHER = "Other"

META_TRACK_NAME = 0x03
META_MARKER = 0x06
META_END = 0x2F
META_TEMPO = 0x51
META_TIME_SIG = 0x58
META_KEY_SIG = 0x59

_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


class MidiEventRaw(NamedTuple):
    tick: int
    kind: str
    channel: int | None
    data: bytes
    meta: int | None = None  # meta-event type for kind Other / named metas


@dataclass(frozen=True)
class SmfFile:
    format: int
    division: int
    tracks: tuple[tuple[MidiEventRaw, ...], ...]


def read_vlq(buf: bytes, pos: int, end: int) -> tuple[int, int]:
    """Decode a variable-length quantity at ``pos``; returns (value, next pos)."""
    value = 0
    for i in range(4):
        if pos + i >= end:
            raise TruncatedChunk(pos + i, "variable-length quantity")
        b = buf[pos + i]
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos + i + 1
    raise BadVLQ(pos)


def _parse_track(buf: bytes, pos: int, end: int) -> tuple[MidiEventRaw, ...]:
    events: list[MidiEventRaw] = []
    tick = 0
    running: int | None = None
    while pos < end:
        delta, pos = read_vlq(buf, pos, end)
        tick += delta
        if pos >= end:
            raise TruncatedChunk(pos, "event")
        start = pos
        status = buf[pos]
        if status & 0x80:
            pos += 1
        elif running is None:
            raise BadEvent(start, "data byte without running status")
        else:
            status = running
        if status == 0xFF:
            running = None
            if pos >= end:
                raise TruncatedChunk(pos, "meta event")
            mtype = buf[pos]
            n, pos = read_vlq(buf, pos + 1, end)
            if pos + n > end:
                raise TruncatedChunk(pos, "meta event data")
            data = bytes(buf[pos:pos + n])
            pos += n
            if mtype == META_END:
                return tuple(events)
            kind = {META_TEMPO: TEMPO, META_TIME_SIG: TIME_SIG, META_TRACK_NAME: TRACK_NAME}.get(mtype, OTHER)
            if kind == TEMPO and (n != 3 or not any(data)):
                raise BadEvent(start, "tempo meta must carry 3 bytes, not all zero")
            if kind == TIME_SIG and n < 2:
                raise BadEvent(start, "time-signature meta too short")
            events.append(MidiEventRaw(tick, kind, None, data, mtype))
        elif status in (0xF0, 0xF7):
            running = None
            n, pos = read_vlq(buf, pos, end)
            if pos + n > end:
                raise TruncatedChunk(pos, "sysex data")
            pos += n
        elif status >= 0xF0:
            raise BadEvent(start, f"status 0x{status:02X} not allowed in a file")
        else:
            running = status
            hi, ch = status & 0xF0, status & 0x0F
            n = _DATA_LEN[hi]
            if pos + n > end:
                raise TruncatedChunk(pos, "channel event")
            data = bytes(buf[pos:pos + n])
            if any(b & 0x80 for b in data):
                raise BadEvent(start, "data byte has its high bit set")
            pos += n
            if hi == 0x90 and data[1] > 0:
                kind = NOTE_ON
            elif hi in (0x80, 0x90):
                kind = NOTE_OFF
            elif hi == 0xC0:
                kind = PROGRAM
            else:
                kind = OTHER
            events.append(MidiEventRaw(tick, kind, ch, data))
    return tuple(events)


def parse_smf(data: bytes) -> SmfFile:
    """Parse a complete SMF byte string.

    >>> parse_smf(bytes.fromhex("4d546864000000060000000100604d54726b0000000400ff2f00")).division
    96
    """
    buf = memoryview(bytes(data))
    n = len(buf)
    if n < 8 or bytes(buf[0:4]) != b"MThd":
        raise BadMagic(0, bytes(buf[0:4]))
    hlen = int.from_bytes(buf[4:8], "big")
    if hlen != 6:
        raise BadHeader(f"header length {hlen}, expected 6")
    if n < 14:
        raise TruncatedChunk(8, "header")
    fmt = int.from_bytes(buf[8:10], "big")
    ntrks = int.from_bytes(buf[10:12], "big")
    division = int.from_bytes(buf[12:14], "big")
    if fmt not in (0, 1):
        raise UnsupportedFormat(fmt)
    if division & 0x8000:
        raise UnsupportedDivision("SMPTE time division is not supported")
    if division == 0:
        raise BadHeader("division must be positive")
    if fmt == 0 and ntrks != 1:
        raise BadHeader(f"format 0 needs exactly one track, header says {ntrks}")
    tracks = []
    pos = 14
    while len(tracks) < ntrks:
        if pos + 8 > n:
            raise TruncatedChunk(pos, "chunk header")
        ctype = bytes(buf[pos:pos + 4])
        clen = int.from_bytes(buf[pos + 4:pos + 8], "big")
        body = pos + 8
        if body + clen > n:
            raise TruncatedChunk(pos, "chunk body")
        if ctype == b"MTrk":
            tracks.append(_parse_track(buf, body, body + clen))
        pos = body + clen
    return SmfFile(fmt, division, tuple(tracks))


def tempo_bpm(ev: MidiEventRaw) -> float:
    return 60_000_000 / int.from_bytes(ev.data, "big")


def time_signature(ev: MidiEventRaw) -> tuple[int, int]:
    return ev.data[0], 2 ** ev.data[1]
