"""Corpus directories: ``<root>/<genre>/<name>.mid`` plus optional lyrics."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..conditioning import EmptyLyrics, Lexicon, g2p, parse_lyrics
from ..core import LeadSheet
from ..remi import encode
from ..vocab import Vocab
from ..xval import encode_xval
from .quantize import quantize
from .sheetio import read_leadsheet
from .smf import parse_smf

MIDI_SUFFIXES = (".mid", ".midi")


@dataclass(frozen=True)
class CorpusItem:
    genre: str
    name: str
    sheet: LeadSheet


def midi_files(root: str | Path) -> list[Path]:
    root = Path(root)
    return sorted(p for p in root.rglob("*") if p.suffix.lower() in MIDI_SUFFIXES and p.is_file())


def genre_of(path: Path, root: Path) -> str:
    rel = path.relative_to(root)
    return rel.parts[0] if len(rel.parts) > 1 else "all"


def ingest_file(path: str | Path, lexicon: Lexicon | None = None, language: str = "en") -> LeadSheet:
    path = Path(path)
    lyrics = None
    lyr = path.with_name(path.stem + ".lyrics.txt")
    if lyr.exists():
        try:
            pq = g2p(parse_lyrics(lyr.read_text(encoding="utf-8"), language), lexicon)
            lyrics = [s.phonemes for s in pq.syllables]
        except EmptyLyrics:
            lyrics = None
    return quantize(parse_smf(path.read_bytes()), lyrics)


def ingest_corpus(root: str | Path, lexicon: Lexicon | None = None) -> list[CorpusItem]:
    """Every MIDI file under ``root``, in sorted path order."""
    root = Path(root)
    return [CorpusItem(genre_of(p, root), p.stem, ingest_file(p, lexicon)) for p in midi_files(root)]


def sheet_files(root: str | Path) -> list[Path]:
    root = Path(root)
    if root.is_file():
        return [root]
    return sorted(p for p in root.rglob("*.json") if p.is_file())


def load_sheets(root: str | Path, genre: str = "all") -> list[CorpusItem]:
    """Lead sheet JSON files under ``root``; ``genre`` filters by first subdirectory."""
    root = Path(root)
    out = []
    for p in sheet_files(root):
        g = genre_of(p, root) if root.is_dir() else "all"
        if genre in ("all", g):
            out.append(CorpusItem(g, p.stem, read_leadsheet(p)))
    return out


def corpus_stats(sheets: list[LeadSheet], vocab: Vocab) -> dict:
    """Sequence-length comparison of the REMI and xVal encodings."""
    remi = [len(encode(ls, vocab)) for ls in sheets]
    xval = [len(encode_xval(ls, vocab)) for ls in sheets]
    n = len(sheets)
    events = sum(len(t.events) for ls in sheets for t in ls.tracks)
    return {
        "sheets": n,
        "events": events,
        "bars": sum(ls.n_bars for ls in sheets),
        "remi_tokens": sum(remi),
        "xval_tokens": sum(xval),
        "remi_mean": sum(remi) / n if n else 0.0,
        "xval_mean": sum(xval) / n if n else 0.0,
        "xval_to_remi": sum(xval) / sum(remi) if n else 0.0,
    }
