"""Lead sheet JSON files."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from ..core import (
    CHORD_QUALITIES, ChordEvent, GridPosition, InvalidEvent, InvalidMeta, LeadSheet, LeadSheetError,
    LeadSheetMeta, NoteEvent, Track, TrackKind, normalize, slots_per_bar_for,
)

LSV = 1
TOP_KEYS = {"lsv", "meta", "slots_per_bar", "tracks", "n_bars"}
META_KEYS = {"tempo_bpm", "time_sig", "key", "sections"}
NOTE_KEYS = {"pitch", "bar", "slot", "dur", "phonemes"}
CHORD_KEYS = {"root", "quality", "bar", "slot", "dur"}


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path


def to_dict(ls: LeadSheet) -> dict:
    tracks = {}
    for t in ls.tracks:
        rows = []
        for e in t.events:
            if isinstance(e, ChordEvent):
                rows.append({"root": e.root, "quality": e.quality, "bar": e.onset.bar, "slot": e.onset.slot,
                             "dur": e.duration})
            else:
                row = {"pitch": e.pitch, "bar": e.onset.bar, "slot": e.onset.slot, "dur": e.duration}
                if e.phonemes:
                    row["phonemes"] = list(e.phonemes)
                rows.append(row)
        tracks[t.kind.value] = rows
    m = ls.meta
    return {
        "lsv": LSV,
        "meta": {"tempo_bpm": m.tempo_bpm, "time_sig": list(m.time_sig), "key": list(m.key),
                 "sections": [[label, bar] for label, bar in m.sections]},
        "n_bars": ls.n_bars,
        "slots_per_bar": ls.slots_per_bar,
        "tracks": tracks,
    }


def dumps(ls: LeadSheet) -> str:
    return json.dumps(to_dict(ls), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _keys(obj, allowed: set, required: set, path: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    for k in obj:
        if k not in allowed:
            raise SchemaError(f"{path}/{k}", "unknown key")
    for k in sorted(required):
        if k not in obj:
            raise SchemaError(f"{path}/{k}", "missing key")


def _int(v, path: str, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(path, "expected an integer")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise SchemaError(path, f"{v} outside [{lo}, {hi}]")
    return v


def _pair(v, path: str) -> list:
    if not isinstance(v, list) or len(v) != 2:
        raise SchemaError(path, "expected a two-element array")
    return v


def from_dict(doc) -> LeadSheet:
    _keys(doc, TOP_KEYS, {"lsv", "meta", "slots_per_bar", "tracks"}, "")
    if doc["lsv"] != LSV:
        raise SchemaError("/lsv", f"unsupported schema version {doc['lsv']!r}")
    meta = doc["meta"]
    _keys(meta, META_KEYS, META_KEYS, "/meta")
    ts = tuple(_int(x, f"/meta/time_sig/{i}", 1) for i, x in enumerate(_pair(meta["time_sig"], "/meta/time_sig")))
    key = _pair(meta["key"], "/meta/key")
    tonic = _int(key[0], "/meta/key/0", 0, 11)
    if key[1] not in ("major", "minor"):
        raise SchemaError("/meta/key/1", "mode must be major or minor")
    if not isinstance(meta["sections"], list):
        raise SchemaError("/meta/sections", "expected an array")
    sections = []
    for i, s in enumerate(meta["sections"]):
        label, bar = _pair(s, f"/meta/sections/{i}")
        if not isinstance(label, str):
            raise SchemaError(f"/meta/sections/{i}/0", "expected a string")
        sections.append((label, _int(bar, f"/meta/sections/{i}/1", 0)))
    lm = LeadSheetMeta(_int(meta["tempo_bpm"], "/meta/tempo_bpm"), ts, (tonic, key[1]), tuple(sections))
    spb = _int(doc["slots_per_bar"], "/slots_per_bar", 1)
    try:
        expected = slots_per_bar_for(ts)
    except LeadSheetError as e:
        raise SchemaError("/meta/time_sig", str(e)) from None
    if spb != expected:
        raise SchemaError("/slots_per_bar", f"{spb} does not match time signature (expected {expected})")
    if not isinstance(doc["tracks"], dict):
        raise SchemaError("/tracks", "expected an object")
    tracks = []
    for name, rows in doc["tracks"].items():
        base = f"/tracks/{name}"
        try:
            kind = TrackKind(name)
        except ValueError:
            raise SchemaError(base, "unknown track kind") from None
        if not isinstance(rows, list):
            raise SchemaError(base, "expected an array")
        evs = []
        for i, r in enumerate(rows):
            p = f"{base}/{i}"
            if kind is TrackKind.CHORD:
                _keys(r, CHORD_KEYS, CHORD_KEYS, p)
                if r["quality"] not in CHORD_QUALITIES:
                    raise SchemaError(f"{p}/quality", f"unknown quality {r['quality']!r}")
                evs.append(ChordEvent(_int(r["root"], f"{p}/root", 0, 11), r["quality"],
                                      GridPosition(_int(r["bar"], f"{p}/bar", 0), _int(r["slot"], f"{p}/slot", 0)),
                                      _int(r["dur"], f"{p}/dur", 1)))
            else:
                _keys(r, NOTE_KEYS, NOTE_KEYS - {"phonemes"}, p)
                ph = r.get("phonemes", [])
                if not isinstance(ph, list) or not all(isinstance(x, str) for x in ph):
                    raise SchemaError(f"{p}/phonemes", "expected an array of strings")
                evs.append(NoteEvent(_int(r["pitch"], f"{p}/pitch", 0, 127),
                                     GridPosition(_int(r["bar"], f"{p}/bar", 0), _int(r["slot"], f"{p}/slot", 0)),
                                     _int(r["dur"], f"{p}/dur", 1), tuple(ph)))
        tracks.append(Track(kind, tuple(evs)))
    try:
        ls = normalize(LeadSheet(lm, tuple(tracks), 1, spb))
    except InvalidEvent as e:
        raise SchemaError(f"/tracks/{e.kind.value}/{e.index}", str(e)) from None
    except InvalidMeta as e:
        raise SchemaError("/meta", str(e)) from None
    except LeadSheetError as e:
        raise SchemaError("", str(e)) from None
    if "n_bars" in doc:
        n = _int(doc["n_bars"], "/n_bars", 1)
        if n < ls.n_bars:
            raise SchemaError("/n_bars", f"{n} bars but content reaches bar {ls.n_bars - 1}")
        ls = replace(ls, n_bars=n)
    return ls


def loads(text: str) -> LeadSheet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("", f"invalid JSON: {e}") from None
    return from_dict(doc)


def read_leadsheet(path: str | Path) -> LeadSheet:
    return loads(Path(path).read_text(encoding="utf-8"))


def write_leadsheet(ls: LeadSheet, path: str | Path) -> None:
    Path(path).write_text(dumps(ls), encoding="utf-8")
