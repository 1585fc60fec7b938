"""Symbolic in-painting over a bar range and a set of tracks.

A causal model cannot see the music to the right of the hole, so each edit
draws several candidates from the left context and keeps the one under which
the candidate region plus a few following bars of the original score best.
Everything outside the mask is copied token for token.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .conditioning import Lexicon, LyricPrompt, g2p
from .core import LeadSheet, NoteEvent, Track, TrackKind
from .generator import Controller, Decoder, LyricQueue, SamplerConfig
from .grammar import GrammarState, Phase
from .ngram import NGramModel, score
from .remi import TokenSeq, decode_ids, encode
from .vocab import Family, Vocab

DEFAULT_CANDIDATES = 16
DEFAULT_RIGHT_CTX = 2


class EditMode(str, enum.Enum):
    MELODY = "melody-edit"
    LYRICS = "lyric-edit"
    REGION = "region-regen"


class EmptyRegion(ValueError):
    pass


class SyllableMismatch(UserWarning):
    pass


@dataclass(frozen=True)
class EditMask:
    a: int
    b: int
    kinds: frozenset[TrackKind]
    mode: EditMode = EditMode.REGION

    def __post_init__(self):
        object.__setattr__(self, "kinds", frozenset(TrackKind.parse(k) if isinstance(k, str) else k
                                                    for k in self.kinds))
        object.__setattr__(self, "mode", EditMode(self.mode))
        if not 0 <= self.a < self.b:
            raise ValueError(f"bad bar range [{self.a}, {self.b})")
        if not self.kinds:
            raise ValueError("edit mask needs at least one track")

    def check(self, ls: LeadSheet) -> None:
        if self.b > ls.n_bars:
            raise ValueError(f"bar range [{self.a}, {self.b}) exceeds {ls.n_bars} bars")

    def covers(self, kind: TrackKind, bar: int) -> bool:
        return kind in self.kinds and self.a <= bar < self.b


@dataclass(frozen=True)
class Candidate:
    tokens: TokenSeq
    score: float


# -- token surgery ---------------------------------------------------------------


def _bar_starts(tokens: Sequence[int], vocab: Vocab) -> list[int]:
    """Index of every Bar token, followed by the index of EOS."""
    bar, eos = vocab.token(Family.BAR), vocab.token(Family.EOS)
    out = [i for i, t in enumerate(tokens) if t == bar]
    out.append(tokens.index(eos))
    return out


def _fixed_stream(region: Sequence[int], vocab: Vocab, editable: frozenset[TrackKind]) -> list[int]:
    """Region tokens with the editable track blocks removed."""
    out, skipping = [], False
    for t in region:
        fam = vocab.family(t)
        if fam is Family.TRACK:
            skipping = vocab.value(t) in editable
        elif fam in (Family.BAR, Family.SECTION):
            skipping = False
        if not skipping:
            out.append(t)
    return out


class TemplateController(Controller):
    """Replays a fixed token stream, opening holes at editable tracks.

    Outside a hole the next fixed token is forced; at a track boundary an
    editable ``Track_k`` may be inserted if its rank fits before the next
    fixed track.  The last fixed token ends the region.
    """

    def __init__(self, *args, fixed: Sequence[int], editable: frozenset[TrackKind], **kwargs):
        super().__init__(*args, **kwargs)
        self.fixed = list(fixed)
        self.f = 0
        self.editable = editable
        self.editable_ranks = sorted(k.rank for k in editable)

    @property
    def done(self) -> bool:
        return self.f >= len(self.fixed)

    def _in_hole(self, gs: GrammarState) -> bool:
        return gs.kind in self.editable and gs.phase in (
            Phase.IN_TRACK, Phase.EXPECT_PITCH, Phase.EXPECT_CHORD_QUAL, Phase.EXPECT_DUR)

    def _boundary(self, gs: GrammarState) -> np.ndarray:
        nxt = self.fixed[self.f]
        m = np.zeros(self.size, dtype=bool)
        m[nxt] = True
        fam = self.vocab.family(nxt)
        if fam in (Family.TRACK, Family.BAR, Family.EOS):
            bound = self.vocab.value(nxt).rank if fam is Family.TRACK else 6
            for r in self.editable_ranks:
                if gs.last_track_rank < r < bound:
                    m[self.track_lo + r] = True
        return m

    def allowed(self, gs: GrammarState) -> np.ndarray:
        hole = self._in_hole(gs)
        if not hole:
            return self._boundary(gs) & super().allowed(gs) if self._is_exit_point() else self._boundary(gs)
        m = super().allowed(gs)
        if gs.phase is Phase.IN_TRACK and gs.last_pos >= 0:
            exits = self._boundary(gs)
            lo, hi = self.track_lo, self.track_lo + 6
            m[lo:hi] &= exits[lo:hi]
            m[self.bar_tok] &= exits[self.bar_tok]
            m[self.eos_tok] &= exits[self.eos_tok]
        return m

    def _is_exit_point(self) -> bool:
        return self.vocab.family(self.fixed[self.f]) in (Family.TRACK, Family.BAR, Family.EOS)

    def observe(self, tok: int, before: GrammarState, after: GrammarState) -> None:
        super().observe(tok, before, after)
        if not self.done and tok == self.fixed[self.f]:
            self.f += 1


def _region_phonemes(tokens: Sequence[int], vocab: Vocab) -> list[tuple[str, ...]]:
    """Syllables of the vocal notes in a token span, one per note with phonemes."""
    out, cur, kind = [], [], None
    for t in tokens:
        fam = vocab.family(t)
        if fam is Family.TRACK:
            kind = vocab.value(t)
        elif fam is Family.POS:
            cur = []
        elif fam is Family.PHON:
            cur.append(vocab.value(t))
        elif fam is Family.PITCH and kind is TrackKind.VOCAL and cur:
            out.append(tuple(cur))
            cur = []
    return out


# -- candidate generation -----------------------------------------------------------


def inpaint_candidates(ls: LeadSheet, mask: EditMask, m_cond: NGramModel, m_uncond: NGramModel | None = None,
                       cfg: SamplerConfig | None = None, *, vocab: Vocab, syllables=None,
                       n_candidates: int = DEFAULT_CANDIDATES, right_ctx_bars: int = DEFAULT_RIGHT_CTX,
                       relax_on_deadend: bool = False) -> list[Candidate]:
    """Draw ``n_candidates`` fills for the masked region and score each.

    ``syllables`` is the lyric queue re-forced into the Vocal track; None
    keeps the region's own phonemes when Vocal is editable.  Candidate ``i``
    uses the ``i``-th child of the seed sequence, so results do not depend on
    the order in which candidates are produced.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    mask.check(ls)
    cfg = cfg or SamplerConfig()
    m_uncond = m_uncond or m_cond
    ts = encode(ls, vocab)
    toks = list(ts.tokens)
    starts = _bar_starts(toks, vocab)
    lo, hi = starts[mask.a], starts[mask.b]
    left, region, right = toks[:lo], toks[lo:hi], toks[hi:]
    vocal_editable = TrackKind.VOCAL in mask.kinds
    if syllables is None and vocal_editable:
        syllables = _region_phonemes(region, vocab)
    fixed = _fixed_stream(region, vocab, mask.kinds) + [right[0]]
    r_end = starts[min(mask.b + right_ctx_bars, len(starts) - 1)] - hi
    if mask.b + right_ctx_bars >= len(starts) - 1:
        r_end = len(right)  # through EOS

    dec = Decoder(m_cond, m_uncond, vocab, cfg, relax_on_deadend)
    gs0 = dec.grammar.run(left)
    slots = gs0.slots
    out = []
    for i, child in enumerate(np.random.SeedSequence(cfg.seed).spawn(n_candidates)):
        lyrics = None
        if vocal_editable and syllables:
            lyrics = LyricQueue([list(syllables)], [mask.a], [mask.b])
        ctl = TemplateController(vocab, cfg, lyrics, key=ls.meta.key, slots=slots, fixed=fixed,
                                 editable=mask.kinds)
        if vocal_editable and not syllables:
            ctl.forbid_phon = True
        rng = np.random.Generator(np.random.PCG64(child))
        gen = []
        for tok in dec.run(left, gs0, ctl, rng, max_tokens=cfg.max_tokens):
            gen.append(tok)
            if ctl.done:
                break
        if not ctl.done:
            raise RuntimeError("region generation hit max_tokens before closing the region")
        full = left + gen[:-1] + right
        s = score(m_cond, full, cfg.alpha, start=lo, end=lo + len(gen) - 1 + r_end)
        out.append(Candidate(TokenSeq(tuple(full), vocab.hash), s))
    return out


def select(cands: Sequence[Candidate]) -> int:
    """Index of the best-scoring candidate; the lowest index wins ties."""
    best = 0
    for i, c in enumerate(cands):
        if c.score > cands[best].score:
            best = i
    return best


def _finish(ls: LeadSheet, ts: TokenSeq, vocab: Vocab) -> LeadSheet:
    out = decode_ids(ts.tokens, vocab)
    return replace(out, n_bars=ls.n_bars)


def _inpaint(ls, mask, m_cond, m_uncond, cfg, vocab, syllables=None, **kw) -> LeadSheet:
    cands = inpaint_candidates(ls, mask, m_cond, m_uncond, cfg, vocab=vocab, syllables=syllables, **kw)
    return _finish(ls, cands[select(cands)].tokens, vocab)


def _vocal_in_region(ls: LeadSheet, mask: EditMask) -> list[NoteEvent]:
    return [e for e in ls.events(TrackKind.VOCAL) if mask.a <= e.onset.bar < mask.b]


# -- workflows ------------------------------------------------------------------------


def edit_melody(ls: LeadSheet, mask: EditMask, m_cond: NGramModel, m_uncond: NGramModel | None = None,
                cfg: SamplerConfig | None = None, *, vocab: Vocab, n_candidates: int = DEFAULT_CANDIDATES,
                right_ctx_bars: int = DEFAULT_RIGHT_CTX, relax_on_deadend: bool = False) -> LeadSheet:
    """Regenerate the vocal line in the region, keeping its phonemes."""
    if mask.mode is not EditMode.MELODY or TrackKind.VOCAL not in mask.kinds:
        raise ValueError("melody edit needs mode melody-edit and the Vocal track")
    if not _vocal_in_region(ls, mask):
        raise EmptyRegion(f"no vocal notes in bars [{mask.a}, {mask.b})")
    return _inpaint(ls, mask, m_cond, m_uncond, cfg, vocab, n_candidates=n_candidates,
                    right_ctx_bars=right_ctx_bars, relax_on_deadend=relax_on_deadend)


def regen_region(ls: LeadSheet, mask: EditMask, m_cond: NGramModel, m_uncond: NGramModel | None = None,
                 cfg: SamplerConfig | None = None, *, vocab: Vocab, n_candidates: int = DEFAULT_CANDIDATES,
                 right_ctx_bars: int = DEFAULT_RIGHT_CTX, relax_on_deadend: bool = False) -> LeadSheet:
    """Regenerate every selected track in the region.  Sung phonemes are kept."""
    if mask.mode is not EditMode.REGION:
        raise ValueError("regen_region needs mode region-regen")
    return _inpaint(ls, mask, m_cond, m_uncond, cfg, vocab, n_candidates=n_candidates,
                    right_ctx_bars=right_ctx_bars, relax_on_deadend=relax_on_deadend)


def edit_lyrics(ls: LeadSheet, mask: EditMask, new_lyrics: str, lexicon: Lexicon | None = None,
                cfg: SamplerConfig | None = None, *, language: str = "en", vocab: Vocab | None = None,
                m_cond: NGramModel | None = None, m_uncond: NGramModel | None = None,
                n_candidates: int = DEFAULT_CANDIDATES, right_ctx_bars: int = DEFAULT_RIGHT_CTX,
                relax_on_deadend: bool = False) -> LeadSheet:
    """Replace the sung words in the region.

    With the same number of syllables the phonemes are swapped in place and
    nothing else changes.  Otherwise the vocal notes of the region are
    regenerated around the new syllables (this needs a model) and a
    :class:`SyllableMismatch` warning is issued.
    """
    if mask.mode is not EditMode.LYRICS:
        raise ValueError("edit_lyrics needs mode lyric-edit")
    mask.check(ls)
    pq = g2p(LyricPrompt((("verse", new_lyrics),), language), lexicon)
    new = [s.phonemes for s in pq.syllables]
    sung = [e for e in _vocal_in_region(ls, mask) if e.phonemes]
    if len(new) == len(sung):
        swap = {e.identity: p for e, p in zip(sung, new)}
        tracks = []
        for tr in ls.tracks:
            if tr.kind is TrackKind.VOCAL:
                tr = Track(tr.kind, tuple(replace(e, phonemes=swap.get(e.identity, e.phonemes))
                                          for e in tr.events))
            tracks.append(tr)
        return replace(ls, tracks=tuple(tracks))
    warnings.warn(SyllableMismatch(f"{len(new)} new syllables for {len(sung)} sung notes; "
                                   "regenerating the vocal rhythm"), stacklevel=2)
    if m_cond is None or vocab is None:
        raise ValueError("a model and vocabulary are needed when syllable counts differ")
    vmask = EditMask(mask.a, mask.b, frozenset({TrackKind.VOCAL}), EditMode.MELODY)
    cands = inpaint_candidates(ls, vmask, m_cond, m_uncond, cfg, vocab=vocab, syllables=new,
                               n_candidates=n_candidates, right_ctx_bars=right_ctx_bars,
                               relax_on_deadend=relax_on_deadend)
    return _finish(ls, cands[select(cands)].tokens, vocab)


def apply_edit(ls: LeadSheet, mask: EditMask, m_cond: NGramModel, m_uncond: NGramModel | None = None,
               cfg: SamplerConfig | None = None, *, vocab: Vocab, lyrics: str | None = None,
               language: str = "en", lexicon: Lexicon | None = None, **kw) -> LeadSheet:
    """Dispatch on ``mask.mode``."""
    if mask.mode is EditMode.MELODY:
        return edit_melody(ls, mask, m_cond, m_uncond, cfg, vocab=vocab, **kw)
    if mask.mode is EditMode.REGION:
        return regen_region(ls, mask, m_cond, m_uncond, cfg, vocab=vocab, **kw)
    if lyrics is None:
        raise ValueError("lyric edit needs new lyrics")
    return edit_lyrics(ls, mask, lyrics, lexicon, cfg, language=language, vocab=vocab, m_cond=m_cond,
                       m_uncond=m_uncond, **kw)


def parse_edit_spec(spec: dict) -> tuple[EditMask, str | None, str]:
    """``{"bars": [a, b], "tracks": [...], "mode": ..., "lyrics": ...}``."""
    unknown = set(spec) - {"bars", "tracks", "mode", "lyrics", "language"}
    if unknown:
        raise ValueError(f"unknown edit-spec keys {sorted(unknown)}")
    try:
        a, b = spec["bars"]
        mode = EditMode(spec.get("mode", "region-regen"))
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"bad edit spec: {e}") from None
    tracks = spec.get("tracks") or (["Vocal"] if mode is not EditMode.REGION else [])
    mask = EditMask(int(a), int(b), frozenset(TrackKind.parse(t) for t in tracks), mode)
    return mask, spec.get("lyrics"), spec.get("language", "en")


def outside_mask_diff(original: LeadSheet, edited: LeadSheet, mask: EditMask):
    """``compare`` restricted to events the mask does not cover."""
    from .core import compare

    return compare(original, edited).restrict(lambda kind, ev: not mask.covers(kind, ev.onset.bar))

