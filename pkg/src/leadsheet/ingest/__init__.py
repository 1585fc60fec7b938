"""MIDI ingestion, quantization and lead sheet files."""

from .corpus import CorpusItem, corpus_stats, ingest_corpus, ingest_file, load_sheets
from .quantize import IngestWarning, NoNotes, classify, match_chord, quantize, snap
from .sheetio import SchemaError, dumps, loads, read_leadsheet, write_leadsheet
from .smf import (
    BadEvent, BadHeader, BadMagic, BadVLQ, MidiEventRaw, SmfError, SmfFile, TruncatedChunk, UnsupportedDivision,
    UnsupportedFormat, parse_smf, read_vlq,
)

__all__ = [
    "BadEvent", "BadHeader", "BadMagic", "BadVLQ", "CorpusItem", "IngestWarning", "MidiEventRaw", "NoNotes",
    "SchemaError", "SmfError", "SmfFile", "TruncatedChunk", "UnsupportedDivision", "UnsupportedFormat", "classify",
    "corpus_stats", "dumps", "ingest_corpus", "ingest_file", "load_sheets", "loads", "match_chord", "parse_smf",
    "quantize", "read_leadsheet", "read_vlq", "snap", "write_leadsheet",
]
