"""User prompts: style controls, lyrics, phoneme queues and the prefix."""

from __future__ import annotations

import math
import os
import re
import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .core import MODES, SECTION_LABELS, TEMPO_RANGE, slots_per_bar_for
from .remi import TokenSeq, UnknownPhoneme, check_vocab, header_tokens
from .core import LeadSheetMeta
from .vocab import ARPABET_VOWELS, PINYIN_FINALS, PINYIN_INITIALS, Family, Vocab

LEXICON_ENV = "LEADSHEET_LEXICON"
LANGUAGES = ("en", "zh-pinyin")


class EmptyLyrics(ValueError):
    pass


class UnmappableCharacter(ValueError):
    def __init__(self, line: int, column: int, char: str):
        super().__init__(f"cannot map {char!r} at line {line}, column {column}")
        self.line = line
        self.column = column
        self.position = (line, column)


# -- lexicon --------------------------------------------------------------------


class Lexicon(dict):
    """Uppercase word -> tuple of ARPAbet symbols (stress marks removed)."""

    @classmethod
    def parse(cls, text: str) -> "Lexicon":
        lex = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith(";;;") or line.startswith("#"):
                continue
            word, *phones = line.split()
            word = word.upper()
            if word not in lex:
                lex[word] = tuple(re.sub(r"\d", "", p) for p in phones)
        return lex

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=4)
def _bundled() -> Lexicon:
    text = resources.files("leadsheet").joinpath("data/lexicon_en.txt").read_text(encoding="utf-8")
    return Lexicon.parse(text)


def default_lexicon() -> Lexicon:
    """The bundled English lexicon, or the file named by ``LEADSHEET_LEXICON``."""
    path = os.environ.get(LEXICON_ENV)
    if path:
        return Lexicon.load(path)
    return _bundled()


# -- prompts ---------------------------------------------------------------------


@dataclass(frozen=True)
class LyricPrompt:
    lines: tuple[tuple[str, str], ...]
    language: str = "en"

    def __post_init__(self):
        if self.language not in LANGUAGES:
            raise ValueError(f"unsupported language {self.language!r}")
        for label, _ in self.lines:
            if label not in SECTION_LABELS:
                raise ValueError(f"unknown section label {label!r}")

    @property
    def word_count(self) -> int:
        return sum(len(text.split()) for _, text in self.lines)


_TAG = re.compile(r"^\s*\[([A-Za-z-]+)\]\s*(.*)$")


def parse_lyrics(text: str, language: str = "en") -> LyricPrompt:
    """Parse ``[section] text`` lines.

    A tag on a line of its own labels the following untagged lines.
    Consecutive lines with the same label form one block.
    """
    blocks: list[list] = []
    label = None
    for raw in text.splitlines():
        if not raw.strip():
            continue
        m = _TAG.match(raw)
        if m:
            label = m.group(1).lower()
            if label not in SECTION_LABELS:
                raise ValueError(f"unknown section tag [{m.group(1)}]")
            blocks.append([label, m.group(2).strip()])
        else:
            if label is None:
                label = "verse"
                blocks.append([label, ""])
            blocks[-1][1] = (blocks[-1][1] + " " + raw.strip()).strip()
    return LyricPrompt(tuple((b[0], b[1]) for b in blocks), language)


@dataclass(frozen=True)
class Syllable:
    phonemes: tuple[str, ...]
    block: int
    word: int
    oov: bool = False


@dataclass(frozen=True)
class PhonemeQueue:
    syllables: tuple[Syllable, ...]
    block_labels: tuple[str, ...]
    words: tuple[str, ...]
    language: str = "en"

    def __len__(self) -> int:
        return len(self.syllables)

    @property
    def oov_words(self) -> tuple[str, ...]:
        seen = {s.word for s in self.syllables if s.oov}
        return tuple(self.words[i] for i in sorted(seen))

    def phonemes(self) -> list[str]:
        return [p for s in self.syllables for p in s.phonemes]

    def units(self) -> list[tuple[str, ...]]:
        return [s.phonemes for s in self.syllables]

    def word_units(self) -> list[tuple[str, ...]]:
        """Per-word pronunciations (concatenated syllables)."""
        out: dict[int, list[str]] = {}
        for s in self.syllables:
            out.setdefault(s.word, []).extend(s.phonemes)
        return [tuple(out[i]) for i in sorted(out)]

    def blocks(self) -> list[tuple[str, list[tuple[str, ...]]]]:
        out = [(label, []) for label in self.block_labels]
        for s in self.syllables:
            out[s.block][1].append(s.phonemes)
        return out


@dataclass(frozen=True)
class StylePrompt:
    tempo_bpm: int = 120
    time_sig: tuple[int, int] = (4, 4)
    key: tuple[int, str] = (0, "major")
    genre: str | None = None
    sections: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        lo, hi = TEMPO_RANGE
        if not lo <= self.tempo_bpm <= hi:
            raise ValueError(f"tempo {self.tempo_bpm} outside [{lo}, {hi}]")
        slots_per_bar_for(self.time_sig)
        if not 0 <= self.key[0] < 12 or self.key[1] not in MODES:
            raise ValueError(f"invalid key {self.key!r}")
        for label, n in self.sections:
            if label not in SECTION_LABELS or n < 1:
                raise ValueError(f"invalid section plan entry ({label!r}, {n})")

    @property
    def meta(self) -> LeadSheetMeta:
        return LeadSheetMeta(self.tempo_bpm, tuple(self.time_sig), tuple(self.key), ())


def parse_sections(spec: str) -> tuple[tuple[str, int], ...]:
    """``"verse:4,chorus:4"`` -> (("verse", 4), ("chorus", 4))."""
    out = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        label, _, n = item.partition(":")
        out.append((label.strip().lower(), int(n) if n else 4))
    return tuple(out)


# -- grapheme to phoneme ----------------------------------------------------------------

_LTS_RULES = (
    ("tch", ("CH",)), ("sch", ("S", "K")), ("igh", ("AY",)),
    ("sh", ("SH",)), ("ch", ("CH",)), ("th", ("TH",)), ("ph", ("F",)), ("wh", ("W",)),
    ("ng", ("NG",)), ("ck", ("K",)), ("qu", ("K", "W")), ("gh", ("G",)),
    ("ee", ("IY",)), ("ea", ("IY",)), ("oo", ("UW",)), ("ou", ("AW",)), ("ow", ("OW",)),
    ("ai", ("EY",)), ("ay", ("EY",)), ("oi", ("OY",)), ("oy", ("OY",)), ("au", ("AO",)),
    ("aw", ("AO",)), ("ie", ("IY",)), ("oa", ("OW",)), ("er", ("ER",)), ("ar", ("AA", "R")),
    ("or", ("AO", "R")), ("ir", ("ER",)), ("ur", ("ER",)),
    ("a", ("AE",)), ("e", ("EH",)), ("i", ("IH",)), ("o", ("AA",)), ("u", ("AH",)),
    ("b", ("B",)), ("c", ("K",)), ("d", ("D",)), ("f", ("F",)), ("g", ("G",)), ("h", ("HH",)),
    ("j", ("JH",)), ("k", ("K",)), ("l", ("L",)), ("m", ("M",)), ("n", ("N",)), ("p", ("P",)),
    ("q", ("K",)), ("r", ("R",)), ("s", ("S",)), ("t", ("T",)), ("v", ("V",)), ("w", ("W",)),
    ("x", ("K", "S")), ("z", ("Z",)),
)


def letter_to_sound(word: str) -> tuple[str, ...]:
    """Rule-based fallback pronunciation for out-of-lexicon words."""
    w = re.sub(r"(.)\1+", r"\1", word.lower().replace("'", ""))
    out: list[str] = []
    i = 0
    while i < len(w):
        if w[i] == "y":
            at_start = i == 0
            out.append("Y" if at_start and len(w) > 1 else "IY")
            i += 1
            continue
        if w[i] == "e" and i == len(w) - 1 and len(w) > 2:
            i += 1  # silent final e
            continue
        for graph, phones in _LTS_RULES:
            if w.startswith(graph, i):
                out.extend(phones)
                i += len(graph)
                break
        else:
            i += 1
    return tuple(out) or ("AH",)


def syllabify(phonemes: Sequence[str], vowels: frozenset[str] = ARPABET_VOWELS) -> list[tuple[str, ...]]:
    """Split at vowel nuclei; consonants between nuclei start the next syllable.

    >>> syllabify(["HH", "AH", "L", "OW"])
    [('HH', 'AH'), ('L', 'OW')]
    """
    nuclei = [i for i, p in enumerate(phonemes) if p in vowels]
    if len(nuclei) <= 1:
        return [tuple(phonemes)] if phonemes else []
    cuts = [0]
    for prev, nxt in zip(nuclei, nuclei[1:]):
        cuts.append(prev + 1)
    cuts.append(len(phonemes))
    sylls = [tuple(phonemes[a:b]) for a, b in zip(cuts, cuts[1:])]
    # trailing consonants stay with the last nucleus
    return [s for s in sylls if s]


_PUNCT = set(string.punctuation) - {"'"} | {"\u2019", "\u2018", "\u201c", "\u201d", "\u2026", "\u2014", "\u2013"}


def _words(text: str, line: int, pinyin: bool) -> list[str]:
    words, cur = [], []
    allowed = re.compile(r"[a-z0-9ü']" if pinyin else r"[a-z']")
    for col, ch in enumerate(text.lower()):
        if allowed.match(ch):
            cur.append(ch)
        elif ch.isspace() or ch in _PUNCT:
            if cur:
                words.append("".join(cur))
                cur = []
        else:
            raise UnmappableCharacter(line, col, ch)
    if cur:
        words.append("".join(cur))
    return [w.strip("'") for w in words if w.strip("'")]


def pinyin_split(syllable: str) -> tuple[str, ...]:
    """``"zhong1"`` -> ("zh", "ong"); raises ValueError if not a pinyin syllable."""
    s = syllable.lower().rstrip("12345").replace("ü", "v")
    for ini in sorted(PINYIN_INITIALS, key=len, reverse=True):
        if s.startswith(ini) and s[len(ini):] in PINYIN_FINALS:
            return (ini, s[len(ini):])
    if s in PINYIN_FINALS:
        return (s,)
    raise ValueError(f"{syllable!r} is not a pinyin syllable")


def g2p(lp: LyricPrompt, lexicon: Lexicon | None = None) -> PhonemeQueue:
    """Convert lyrics to a syllable queue.

    English words come from the lexicon and are split at vowel nuclei;
    unknown words fall back to spelling rules and are flagged ``oov``.
    Pinyin syllables split into initial and final.
    """
    pinyin = lp.language == "zh-pinyin"
    if not pinyin and lexicon is None:
        lexicon = default_lexicon()
    syllables: list[Syllable] = []
    words: list[str] = []
    for b, (label, text) in enumerate(lp.lines):
        for w in _words(text, b + 1, pinyin):
            wi = len(words)
            words.append(w)
            if pinyin:
                try:
                    syllables.append(Syllable(pinyin_split(w), b, wi))
                except ValueError:
                    col = text.lower().find(w)
                    raise UnmappableCharacter(b + 1, max(col, 0), w) from None
                continue
            pron = lexicon.get(w.upper())
            oov = pron is None
            if oov:
                pron = letter_to_sound(w)
            for syl in syllabify(pron):
                syllables.append(Syllable(syl, b, wi, oov))
    if not syllables:
        raise EmptyLyrics("lyrics contain no words")
    return PhonemeQueue(tuple(syllables), tuple(label for label, _ in lp.lines), tuple(words), lp.language)


def default_plan(lp: LyricPrompt, pq: PhonemeQueue | None, time_sig=(4, 4),
                 instrumental_bars: int = 4) -> tuple[tuple[str, int], ...]:
    """One section per lyric block, about two slots per syllable."""
    slots = slots_per_bar_for(time_sig)
    counts = [0] * len(lp.lines)
    if pq is not None:
        for s in pq.syllables:
            counts[s.block] += 1
    plan = []
    for (label, _), n in zip(lp.lines, counts):
        plan.append((label, max(1, math.ceil(2 * n / slots)) if n else instrumental_bars))
    return tuple(plan)


def check_inventory(pq: PhonemeQueue, vocab: Vocab) -> None:
    for p in pq.phonemes():
        if not vocab.has(Family.PHON, p):
            raise UnknownPhoneme(p)


def build_prefix(sp: StylePrompt, vocab: Vocab, pq: PhonemeQueue | None = None,
                 ref: TokenSeq | None = None) -> TokenSeq:
    """Generation context: reference body (if any) followed by the header.

    The phoneme queue is not part of the prefix; it is only checked against
    the vocabulary here and drives forced decoding later.
    """
    if pq is not None:
        check_inventory(pq, vocab)
    toks: list[int] = []
    if ref is not None:
        check_vocab(ref, vocab)
        specials = {vocab.token(Family.BOS), vocab.token(Family.EOS)}
        toks.extend(t for t in ref.tokens if t not in specials)
    toks.extend(header_tokens(sp.meta, vocab))
    return TokenSeq(tuple(toks), vocab.hash)


def lyric_prompt_from_words(blocks: Iterable[tuple[str, str]], language: str = "en") -> LyricPrompt:
    return LyricPrompt(tuple(blocks), language)
