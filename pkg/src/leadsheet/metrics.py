"""Evaluation: lyric error rate, structure match and tonal proxies."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Hashable, Sequence

from . import _kernels
from .conditioning import Lexicon, PhonemeQueue, default_lexicon
from .core import ChordEvent, LeadSheet, TrackKind
from .generator import chord_pitch_classes, scale_pitch_classes
from .grammar import Grammar
from .remi import EncodeError, encode
from .vocab import Vocab

UNITS = ("word", "syllable", "phoneme")
MAX_WORD_SYLLABLES = 8


class EmptyReference(ValueError):
    pass


class MissingKey(ValueError):
    pass


class MissingChords(ValueError):
    pass


def _as_ids(a: Sequence[Hashable], b: Sequence[Hashable]):
    table: dict[Hashable, int] = {}
    ia = [table.setdefault(x, len(table)) for x in a]
    ib = [table.setdefault(x, len(table)) for x in b]
    return ia, ib


def edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Unit-cost Levenshtein distance between two sequences of hashable units."""
    ia, ib = _as_ids(a, b)
    return _kernels.edit_distance(ia, ib)


def wer(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> Fraction:
    """Edit distance over reference length, as an exact fraction."""
    if len(ref) == 0:
        raise EmptyReference("reference is empty")
    return Fraction(edit_distance(ref, hyp), len(ref))


def sung_syllables(ls: LeadSheet) -> list[tuple[str, ...]]:
    """Phoneme lists of the vocal notes that carry any, in time order."""
    return [e.phonemes for e in ls.events(TrackKind.VOCAL) if e.phonemes]


def segment_words(syllables: Sequence[tuple[str, ...]], prons: set[tuple[str, ...]]) -> list[tuple[str, ...]]:
    """Group syllables into as few known pronunciations as possible.

    A syllable that starts no known word stands alone.  Ties prefer the
    longest first word.
    """
    n = len(syllables)
    best: list[tuple[int, int]] = [(0, 0)] * (n + 1)  # (word count, first word length) from i
    for i in range(n - 1, -1, -1):
        cand = (1 + best[i + 1][0], 1)
        phones: tuple[str, ...] = ()
        for j in range(i, min(n, i + MAX_WORD_SYLLABLES)):
            phones += syllables[j]
            if phones in prons:
                c = 1 + best[j + 1][0]
                if c <= cand[0]:
                    cand = (c, j - i + 1)
        best[i] = cand
    out, i = [], 0
    while i < n:
        k = best[i][1]
        out.append(tuple(p for s in syllables[i:i + k] for p in s))
        i += k
    return out


def lyric_units(pq: PhonemeQueue, ls: LeadSheet, unit: str, lexicon: Lexicon | None = None):
    """Reference and hypothesis sequences at the requested unit."""
    if unit not in UNITS:
        raise ValueError(f"unit must be one of {UNITS}")
    hyp_syl = sung_syllables(ls)
    if unit == "syllable":
        return pq.units(), hyp_syl
    if unit == "phoneme":
        return pq.phonemes(), [p for s in hyp_syl for p in s]
    ref = pq.word_units()
    prons = set(ref)
    if pq.language == "en":
        prons |= set((lexicon if lexicon is not None else default_lexicon()).values())
    return ref, segment_words(hyp_syl, prons)


def lyric_wer(pq: PhonemeQueue, ls: LeadSheet, unit: str | None = None, lexicon: Lexicon | None = None) -> Fraction:
    """Error rate of the sung phonemes against the lyric prompt.

    Defaults to words for English and syllables for pinyin.
    """
    if unit is None:
        unit = "syllable" if pq.language == "zh-pinyin" else "word"
    ref, hyp = lyric_units(pq, ls, unit, lexicon)
    return wer(ref, hyp)


def structure_match(plan: Sequence, ls: LeadSheet) -> tuple[float, float]:
    """(positional precision, LCS ratio) of the sheet's section labels against the plan."""
    labels = [p[0] if isinstance(p, (tuple, list)) else p for p in plan]
    if not labels:
        raise ValueError("section plan is empty")
    got = [label for label, _ in ls.meta.sections]
    hits = sum(1 for x, y in zip(labels, got) if x == y)
    a, b = _as_ids(labels, got)
    return hits / len(labels), _kernels.lcs_length(a, b) / len(labels)


def scale_consistency(ls: LeadSheet) -> float:
    """Share of vocal pitches inside the key's diatonic scale (1.0 if no notes)."""
    if ls.meta.key is None:
        raise MissingKey("lead sheet has no key")
    pcs = scale_pitch_classes(ls.meta.key)
    notes = ls.events(TrackKind.VOCAL)
    if not notes:
        return 1.0
    return sum(e.pitch % 12 in pcs for e in notes) / len(notes)


def sounding_chord(chords: Sequence[ChordEvent], abs_slot: int, spb: int) -> ChordEvent | None:
    """Latest-starting chord covering ``abs_slot``; the first in track order wins ties."""
    best = None
    for c in chords:
        start = c.onset.absolute(spb)
        if start <= abs_slot < start + c.duration:
            if best is None or start > best.onset.absolute(spb):
                best = c
    return best


def chord_tone_rate(ls: LeadSheet) -> float:
    """Share of strong-beat vocal notes that are tones of the sounding chord.

    Strong beats are slots divisible by 4.  Notes with no chord sounding are
    left out; with nothing to count the rate is 1.0.
    """
    chords = ls.events(TrackKind.CHORD)
    if not chords:
        raise MissingChords("lead sheet has no chord track")
    spb = ls.slots_per_bar
    hit = total = 0
    for e in ls.events(TrackKind.VOCAL):
        if e.onset.slot % 4:
            continue
        c = sounding_chord(chords, e.onset.absolute(spb), spb)
        if c is None:
            continue
        total += 1
        hit += e.pitch % 12 in chord_pitch_classes(c.root, c.quality)
    return hit / total if total else 1.0


@dataclass(frozen=True)
class EvalReport:
    wer: Fraction | None
    structure_precision: float | None
    structure_lcs: float | None
    scale_consistency: float | None
    chord_tone_rate: float | None
    grammar_valid: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.wer is not None:
            d["wer"] = float(self.wer)
            d["wer_fraction"] = f"{self.wer.numerator}/{self.wer.denominator}"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def evaluate(ls: LeadSheet, vocab: Vocab, pq: PhonemeQueue | None = None, plan: Sequence = (),
             unit: str | None = None, lexicon: Lexicon | None = None) -> EvalReport:
    """All applicable metrics; inapplicable ones are None."""
    try:
        valid = bool(Grammar(vocab).validate(encode(ls, vocab).tokens))
    except EncodeError:
        valid = False
    w = lyric_wer(pq, ls, unit, lexicon) if pq is not None else None
    sp = sl = None
    if plan:
        sp, sl = structure_match(plan, ls)
    try:
        ctr = chord_tone_rate(ls)
    except MissingChords:
        ctr = None
    return EvalReport(w, sp, sl, scale_consistency(ls), ctr, valid)
