"""Closed token vocabulary shared by the REMI codec, grammar and generator."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import CHORD_QUALITIES, MODES, SECTION_LABELS, TRACK_ORDER

ARPABET = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY",
    "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P",
    "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)
ARPABET_VOWELS = frozenset(
    ("AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW")
)

PINYIN_INITIALS = (
    "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x",
    "zh", "ch", "sh", "r", "z", "c", "s", "y", "w",
)
PINYIN_FINALS = (
    "a", "o", "e", "i", "u", "v", "ai", "ei", "ui", "ao", "ou", "iu", "ie", "ve",
    "er", "an", "en", "in", "un", "vn", "ang", "eng", "ing", "ong", "ia", "iao",
    "ian", "iang", "iong", "ua", "uo", "uai", "uan", "uang", "ueng", "ue", "van",
)
PINYIN = PINYIN_INITIALS + PINYIN_FINALS

INVENTORIES = {
    "arpabet": ARPABET,
    "pinyin": PINYIN,
    "mixed": ARPABET + PINYIN,
}

TIME_SIGNATURES = tuple((n, d) for n in (2, 3, 4, 6) for d in (4, 8))
VOCAB_VERSION = 1


class Family(enum.IntEnum):
    BOS = 0
    EOS = 1
    TEMPO = 2
    TIMESIG = 3
    KEY = 4
    SECTION = 5
    BAR = 6
    POS = 7
    TRACK = 8
    PITCH = 9
    DUR = 10
    CHORD_ROOT = 11
    CHORD_QUAL = 12
    PHON = 13


class DuplicatePhoneme(ValueError):
    pass


class VocabMismatch(ValueError):
    pass


@dataclass(frozen=True)
class VocabConfig:
    phonemes: tuple[str, ...] = ARPABET
    positions: int = 16
    tempo_min: int = 40
    tempo_width: int = 4
    tempo_buckets: int = 50
    max_duration: int = 64


def _family_entries(cfg: VocabConfig) -> list[tuple[Family, object, str]]:
    out: list[tuple[Family, object, str]] = [(Family.BOS, None, "BOS"), (Family.EOS, None, "EOS")]
    out += [(Family.TEMPO, k, f"Tempo_{k}") for k in range(cfg.tempo_buckets)]
    out += [(Family.TIMESIG, ts, f"TimeSig_{ts[0]}/{ts[1]}") for ts in TIME_SIGNATURES]
    out += [(Family.KEY, (t, m), f"Key_{t}_{m}") for t in range(12) for m in MODES]
    out += [(Family.SECTION, x, f"Section_{x}") for x in SECTION_LABELS]
    out.append((Family.BAR, None, "Bar"))
    out += [(Family.POS, s, f"Pos_{s}") for s in range(cfg.positions)]
    out += [(Family.TRACK, k, f"Track_{k.value}") for k in TRACK_ORDER]
    out += [(Family.PITCH, p, f"Pitch_{p}") for p in range(128)]
    out += [(Family.DUR, d, f"Dur_{d}") for d in range(1, cfg.max_duration + 1)]
    out += [(Family.CHORD_ROOT, r, f"ChordRoot_{r}") for r in range(12)]
    out += [(Family.CHORD_QUAL, q, f"ChordQual_{q}") for q in CHORD_QUALITIES]
    out += [(Family.PHON, y, f"Phon_{y}") for y in cfg.phonemes]
    return out


def content_hash(names: Iterable[str]) -> int:
    """Deterministic 64-bit hash of the sorted token-name list."""
    blob = "\n".join(sorted(names)).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "big")


@dataclass(frozen=True, eq=False)
class Vocab:
    """Bijection between token names and contiguous integer ids."""

    config: VocabConfig
    names: tuple[str, ...]
    families: np.ndarray  # int8 family per id
    values: tuple[object, ...]
    hash: int
    version: int = VOCAB_VERSION
    _ids: dict[str, int] = field(default_factory=dict, repr=False)
    _by_value: dict[tuple[Family, object], int] = field(default_factory=dict, repr=False)
    _ranges: dict[Family, tuple[int, int]] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.names == other.names

    def __hash__(self) -> int:
        return self.hash

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def hash_hex(self) -> str:
        return f"{self.hash:016x}"

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise KeyError(f"token {name!r} not in vocabulary") from None

    def ids(self, names: Iterable[str]) -> list[int]:
        return [self.id(n) for n in names]

    def name(self, tok: int) -> str:
        return self.names[tok]

    def family(self, tok: int) -> Family:
        return Family(int(self.families[tok]))

    def value(self, tok: int):
        return self.values[tok]

    def token(self, family: Family, value=None) -> int:
        """Id of the token in ``family`` carrying ``value``."""
        try:
            return self._by_value[(family, value)]
        except KeyError:
            raise KeyError(f"no {family.name} token for {value!r}") from None

    def has(self, family: Family, value) -> bool:
        return (family, value) in self._by_value

    def range(self, family: Family) -> tuple[int, int]:
        """Half-open id range of a family (families are contiguous)."""
        return self._ranges[family]

    @property
    def phonemes(self) -> tuple[str, ...]:
        return self.config.phonemes

    def dumps(self) -> str:
        lines = [f"#hash={self.hash_hex}"]
        lines += [f"{i}\t{n}" for i, n in enumerate(self.names)]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def build_vocab(config: VocabConfig | None = None, *, phonemes: Sequence[str] | None = None) -> Vocab:
    """Build the vocabulary in canonical family order.

    >>> build_vocab().size
    365
    """
    cfg = config or VocabConfig()
    if phonemes is not None:
        cfg = VocabConfig(tuple(phonemes), cfg.positions, cfg.tempo_min, cfg.tempo_width,
                          cfg.tempo_buckets, cfg.max_duration)
    if not cfg.phonemes:
        raise ValueError("phoneme inventory is empty")
    seen = set()
    for p in cfg.phonemes:
        if p in seen:
            raise DuplicatePhoneme(p)
        seen.add(p)
    entries = _family_entries(cfg)
    names = tuple(n for _, _, n in entries)
    families = np.array([f for f, _, _ in entries], dtype=np.int8)
    values = tuple(v for _, v, _ in entries)
    ids = {n: i for i, n in enumerate(names)}
    by_value = {(f, v): i for i, (f, v, _) in enumerate(entries)}
    ranges: dict[Family, tuple[int, int]] = {}
    for i, (f, _, _) in enumerate(entries):
        lo, _ = ranges.get(f, (i, i))
        ranges[f] = (lo, i + 1)
    return Vocab(cfg, names, families, values, content_hash(names), VOCAB_VERSION, ids, by_value, ranges)


def vocab_for_inventory(name: str) -> Vocab:
    try:
        return build_vocab(phonemes=INVENTORIES[name])
    except KeyError:
        raise ValueError(f"unknown phoneme inventory {name!r}; choose from {sorted(INVENTORIES)}") from None


def load_vocab(path: str | Path) -> Vocab:
    """Read a vocab file and rebuild the matching :class:`Vocab`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#hash="):
        raise ValueError("vocab file must start with a '#hash=' line")
    declared = int(lines[0][len("#hash="):], 16)
    names = []
    for expected, line in enumerate(lines[1:]):
        idx, name = line.split("\t")
        if int(idx) != expected:
            raise ValueError(f"vocab ids not contiguous at line {expected + 2}")
        names.append(name)
    if content_hash(names) != declared:
        raise VocabMismatch("vocab file hash does not match its contents")
    phonemes = tuple(n[len("Phon_"):] for n in names if n.startswith("Phon_"))
    vocab = build_vocab(phonemes=phonemes)
    if vocab.names != tuple(names):
        raise VocabMismatch("vocab file is not in canonical family order")
    return vocab
