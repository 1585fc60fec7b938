"""Constrained sampling over REMI tokens.

At every step the next-token distributions of a conditional and an
unconditional n-gram model are blended log-linearly (a token-space analog of
classifier-free guidance), intersected with the grammar mask and with the
hard constraints of the active controls, penalized by the soft constraints,
truncated to the top-k candidates, sharpened by the temperature and sampled.
Tokens are yielded as soon as they are chosen.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .core import CHORD_QUALITIES, TrackKind, slots_per_bar_for
from .grammar import Grammar, GrammarState, Phase
from .ngram import DEFAULT_ALPHA, NGramModel
from .remi import TokenSeq, decode_ids
from .vocab import Family, Vocab, VocabMismatch

HARD_CONSTRAINTS = frozenset({"scale", "max_leap", "forced_phonemes"})
SOFT_PENALTIES = frozenset({"off_scale", "leap", "off_chord"})

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
MINOR_SCALE = (0, 2, 3, 5, 7, 8, 10)
CHORD_TONES = {
    "maj": (0, 4, 7),
    "min": (0, 3, 7),
    "dim": (0, 3, 6),
    "aug": (0, 4, 8),
    "dom7": (0, 4, 7, 10),
    "maj7": (0, 4, 7, 11),
    "min7": (0, 3, 7, 10),
    "sus4": (0, 5, 7),
}
assert set(CHORD_TONES) == set(CHORD_QUALITIES)


class AllZero(ValueError):
    pass


class DeadEnd(RuntimeError):
    def __init__(self, step: int, reason: str = ""):
        super().__init__(f"no admissible token at step {step}" + (f": {reason}" if reason else ""))
        self.step = step


class PlanTooShort(ValueError):
    pass


def scale_pitch_classes(key: tuple[int, str]) -> frozenset[int]:
    tonic, mode = key
    steps = MAJOR_SCALE if mode == "major" else MINOR_SCALE
    return frozenset((tonic + s) % 12 for s in steps)


def chord_pitch_classes(root: int, quality: str) -> frozenset[int]:
    return frozenset((root + s) % 12 for s in CHORD_TONES[quality])


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 1.0
    top_k: int = 32
    guidance: float = 1.0
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    max_tokens: int = 4096
    hard_constraints: frozenset[str] = frozenset({"forced_phonemes"})
    max_leap: int = 12
    soft_penalties: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.guidance < 0:
            raise ValueError("guidance must be >= 0")
        if not 0 < self.alpha < 1:
            raise ValueError("backoff alpha must lie in (0, 1)")
        unknown = set(self.hard_constraints) - HARD_CONSTRAINTS
        if unknown:
            raise ValueError(f"unknown hard constraints {sorted(unknown)}")
        unknown = set(self.soft_penalties) - SOFT_PENALTIES
        if unknown:
            raise ValueError(f"unknown soft penalties {sorted(unknown)}")
        object.__setattr__(self, "hard_constraints", frozenset(self.hard_constraints))


def guided_dist(cond: np.ndarray, uncond: np.ndarray, gamma: float) -> np.ndarray:
    """Blend two distributions: ``log p ∝ γ·log cond + (1-γ)·log uncond``.

    A zero in either input stays zero unless its exponent is zero.
    """
    cond = np.asarray(cond, dtype=np.float64)
    uncond = np.asarray(uncond, dtype=np.float64)
    if cond.shape != uncond.shape:
        raise ValueError("distributions differ in length")
    out = _kernels.blend(cond, uncond, gamma)
    if not out.any():
        raise AllZero("blended distribution has empty support")
    return out


# -- controls -----------------------------------------------------------------


class LyricQueue:
    """Syllables to be sung, grouped into consecutive bar segments.

    ``segments[i]`` holds the syllables for bars ``[starts[i], ends[i])``.
    """

    def __init__(self, segments: Sequence[Sequence[tuple[str, ...]]], starts: Sequence[int],
                 ends: Sequence[float]):
        self.queues = [deque(tuple(s) for s in seg) for seg in segments]
        self.starts = list(starts)
        self.ends = list(ends)

    def segment(self, bar: int) -> int | None:
        for i, (a, b) in enumerate(zip(self.starts, self.ends)):
            if a <= bar < b:
                return i
        return None

    def remaining(self, bar: int) -> int:
        i = self.segment(bar)
        return len(self.queues[i]) if i is not None else 0

    def total(self) -> int:
        return sum(len(q) for q in self.queues)

    def pop(self, bar: int) -> tuple[str, ...]:
        return self.queues[self.segment(bar)].popleft()


class Controller:
    """Per-step admissibility and penalties on top of the grammar.

    Subclasses decide the structural plan (which tokens are forced); this
    base class handles lyric forcing, capacity bookkeeping, vocal monophony
    and the tonal constraints.
    """

    def __init__(self, vocab: Vocab, cfg: SamplerConfig, lyrics: LyricQueue | None,
                 key: tuple[int, str] | None = None, slots: int = 16):
        self.vocab = vocab
        self.cfg = cfg
        self.lyrics = lyrics
        self.force_lyrics = lyrics is not None and "forced_phonemes" in cfg.hard_constraints
        self.forbid_phon = lyrics is None
        self.key = key
        self.slots = slots
        self.pending: deque[str] = deque()
        self.prev_vocal_pitch: int | None = None
        self.chords: list[tuple[int, int, int, str]] = []  # (abs start, dur, root, quality)
        self._chord_root = None
        self._chord_qual = None
        self._pos = 0
        self.relax_level = 0
        v = vocab
        self.size = v.size
        self.fam = v.families
        self.pitch_lo = v.range(Family.PITCH)[0]
        self.pos_lo = v.range(Family.POS)[0]
        self.phon_range = v.range(Family.PHON)
        self.track_lo = v.range(Family.TRACK)[0]
        self.bar_tok = v.token(Family.BAR)
        self.eos_tok = v.token(Family.EOS)

    # structure hooks, overridden by subclasses
    def structure(self, gs: GrammarState) -> np.ndarray | None:
        return None

    def segment_end(self, bar: int) -> float:
        if self.lyrics is None:
            return math.inf
        i = self.lyrics.segment(bar)
        return self.lyrics.ends[i] if i is not None else math.inf

    def remaining(self, bar: int) -> int:
        if not self.force_lyrics:
            return 0
        return self.lyrics.remaining(bar)

    def _leave_vocal_mask(self, last_rank: int) -> np.ndarray:
        m = np.zeros(self.size, dtype=bool)
        lo = self.track_lo + max(TrackKind.VOCAL.rank + 1, last_rank + 1)
        m[lo:self.track_lo + 6] = True
        m[self.bar_tok] = True
        m[self.eos_tok] = True
        return m

    def allowed(self, gs: GrammarState) -> np.ndarray:
        m = np.ones(self.size, dtype=bool)
        s = self.structure(gs)
        if s is not None:
            m &= s
        bar = gs.bars_seen - 1
        if self.forbid_phon or (self.force_lyrics and not self.pending):
            m[self.phon_range[0]:self.phon_range[1]] = False
        if gs.phase in (Phase.IN_BAR, Phase.IN_TRACK, Phase.EXPECT_PITCH) and bar >= 0:
            R = self.remaining(bar)
            if gs.phase is Phase.IN_BAR or gs.phase is Phase.IN_TRACK:
                in_vocal = gs.kind is TrackKind.VOCAL and gs.phase is Phase.IN_TRACK
                cap_after = (self.segment_end(bar) - bar - 1) * self.slots
                if R > 0 and R > cap_after and not (gs.last_track_rank > TrackKind.VOCAL.rank):
                    m &= ~self._leave_vocal_mask(gs.last_track_rank)
                if R > 0 and math.isinf(cap_after):
                    m[self.eos_tok] = False
                if in_vocal:
                    lo = self.pos_lo
                    first = gs.last_pos + 1
                    m[lo:lo + max(0, first)] = False
                    if R > 0:
                        slack = cap_after + self.slots - 1 - (R - 1)
                        for q in range(max(first, 0), self.slots):
                            if q > slack:
                                m[lo + q] = False
            if gs.phase is Phase.EXPECT_PITCH and gs.kind is TrackKind.VOCAL:
                if self.pending:
                    m &= False
                    m[self.vocab.token(Family.PHON, self.pending[0])] = True
                else:
                    self._tonal_mask(m)
        return m

    def _tonal_mask(self, m: np.ndarray) -> None:
        hard = self.cfg.hard_constraints
        lo = self.pitch_lo
        if "scale" in hard and self.key is not None:
            pcs = scale_pitch_classes(self.key)
            for p in range(128):
                if p % 12 not in pcs:
                    m[lo + p] = False
        if "max_leap" in hard and self.prev_vocal_pitch is not None and self.relax_level < 2:
            for p in range(128):
                if abs(p - self.prev_vocal_pitch) > self.cfg.max_leap:
                    m[lo + p] = False

    def penalties(self, gs: GrammarState) -> np.ndarray | None:
        soft = self.cfg.soft_penalties
        if not soft or self.relax_level >= 1:
            return None
        if not (gs.phase is Phase.EXPECT_PITCH and gs.kind is TrackKind.VOCAL and not self.pending):
            return None
        pen = np.zeros(self.size)
        lo = self.pitch_lo
        pitches = np.arange(128)
        if soft.get("off_scale") and self.key is not None:
            pcs = scale_pitch_classes(self.key)
            pen[lo:lo + 128] += soft["off_scale"] * np.array([p % 12 not in pcs for p in pitches])
        if soft.get("leap") and self.prev_vocal_pitch is not None:
            pen[lo:lo + 128] += soft["leap"] * np.abs(pitches - self.prev_vocal_pitch) / 12.0
        if soft.get("off_chord"):
            chord = self.sounding_chord((gs.bars_seen - 1) * self.slots + gs.last_pos)
            if chord is not None:
                pcs = chord_pitch_classes(*chord)
                pen[lo:lo + 128] += soft["off_chord"] * np.array([p % 12 not in pcs for p in pitches])
        return pen

    def sounding_chord(self, abs_slot: int) -> tuple[int, str] | None:
        best = None
        for start, dur, root, qual in self.chords:
            if start <= abs_slot < start + dur:
                best = (root, qual)
        return best

    def observe(self, tok: int, before: GrammarState, after: GrammarState) -> None:
        fam = Family(int(self.fam[tok]))
        v = self.vocab.value(tok)
        if fam is Family.POS:
            self._pos = v
            if before.kind is TrackKind.VOCAL and self.force_lyrics:
                bar = before.bars_seen - 1
                if self.lyrics.remaining(bar) > 0:
                    self.pending = deque(self.lyrics.pop(bar))
        elif fam is Family.PHON:
            if self.pending:
                self.pending.popleft()
        elif fam is Family.PITCH and before.kind is TrackKind.VOCAL:
            self.prev_vocal_pitch = v
        elif fam is Family.CHORD_ROOT:
            self._chord_root = v
        elif fam is Family.CHORD_QUAL:
            self._chord_qual = v
        elif fam is Family.DUR and before.kind is TrackKind.CHORD:
            start = (before.bars_seen - 1) * self.slots + self._pos
            self.chords.append((start, v, self._chord_root, self._chord_qual))


class PlanController(Controller):
    """Forces bar count and section markers from a section plan."""

    def __init__(self, *args, plan: Sequence[tuple[str, int]] = (), **kwargs):
        super().__init__(*args, **kwargs)
        self.plan = list(plan)
        self.starts = {}
        bar = 0
        for label, n in self.plan:
            self.starts[bar] = label
            bar += n
        self.total_bars = bar
        self.section_lo, self.section_hi = self.vocab.range(Family.SECTION)

    def structure(self, gs: GrammarState) -> np.ndarray | None:
        m = np.ones(self.size, dtype=bool)
        m[self.section_lo:self.section_hi] = False
        if not self.plan:
            return m
        if gs.phase is Phase.IN_BAR and gs.section_open:
            label = self.starts.get(gs.bars_seen - 1)
            if label is not None:
                m[:] = False
                m[self.vocab.token(Family.SECTION, label)] = True
                return m
        if gs.bars_seen >= self.total_bars:
            m[self.bar_tok] = False
        else:
            m[self.eos_tok] = False
        return m


# -- decoding engine -----------------------------------------------------------


class Decoder:
    def __init__(self, m_cond: NGramModel, m_uncond: NGramModel, vocab: Vocab, cfg: SamplerConfig,
                 relax_on_deadend: bool = False):
        for m in (m_cond, m_uncond):
            if m.vocab_hash != vocab.hash:
                raise VocabMismatch("model and vocabulary differ")
        self.m_cond, self.m_uncond = m_cond, m_uncond
        self.vocab = vocab
        self.cfg = cfg
        self.grammar = Grammar(vocab)
        self.relax = relax_on_deadend

    def dist(self, history: Sequence[int]) -> np.ndarray:
        a = self.cfg.alpha
        cond = self.m_cond.dist_after(history, a)
        if self.m_uncond is self.m_cond or self.cfg.guidance == 1.0:
            return cond
        return guided_dist(cond, self.m_uncond.dist_after(history, a), self.cfg.guidance)

    def choose(self, history: list[int], gs: GrammarState, ctl: Controller, rng: np.random.Generator,
               step: int) -> int:
        gmask = self.grammar.mask(gs)
        levels = (0, 1, 2) if self.relax else (0,)
        for level in levels:
            ctl.relax_level = level
            allowed = gmask & ctl.allowed(gs)
            n = int(allowed.sum())
            if n == 0:
                continue
            u = rng.random()
            if n == 1:
                ctl.relax_level = 0
                return int(np.flatnonzero(allowed)[0])
            w = self.dist(history) * allowed
            pen = ctl.penalties(gs)
            if pen is not None:
                w = w * np.exp(-pen)
            tok = _kernels.top_k_sample(w, self.cfg.top_k, self.cfg.temperature, u)
            ctl.relax_level = 0
            if tok >= 0:
                return tok
        raise DeadEnd(step, f"grammar expects {'|'.join(self.grammar.expected(gs))}")

    def run(self, history: Sequence[int], gs: GrammarState, ctl: Controller, rng: np.random.Generator,
            max_tokens: int | None = None) -> Iterator[int]:
        hist = list(history)
        limit = self.cfg.max_tokens if max_tokens is None else max_tokens
        for step in range(limit):
            if gs.terminal:
                return
            tok = self.choose(hist, gs, ctl, rng, step)
            after = self.grammar.step(gs, tok)
            ctl.observe(tok, gs, after)
            hist.append(tok)
            gs = after
            yield tok


def header_state(grammar: Grammar, prefix: Sequence[int]) -> tuple[GrammarState, dict]:
    """Grammar state after the header at the end of ``prefix``.

    Tokens before the last BOS are reference context and are not parsed.
    """
    v = grammar.vocab
    bos = v.token(Family.BOS)
    start = max(i for i, t in enumerate(prefix) if t == bos) if bos in prefix else None
    if start is None:
        raise ValueError("prefix has no BOS")
    body = list(prefix[start:])
    gs = grammar.run(body)
    info = {"key": None, "time_sig": (4, 4)}
    for t in body:
        if v.family(t) is Family.KEY:
            info["key"] = v.value(t)
        elif v.family(t) is Family.TIMESIG:
            info["time_sig"] = v.value(t)
    return gs, info


def plan_queue(syllables_by_block: Sequence[tuple[str, Sequence[tuple[str, ...]]]],
               plan: Sequence[tuple[str, int]], slots: int) -> LyricQueue:
    """Assign lyric blocks to plan sections in order, matching labels."""
    starts, ends = [], []
    bar = 0
    for _, n in plan:
        starts.append(bar)
        ends.append(bar + n)
        bar += n
    segments: list[list[tuple[str, ...]]] = [[] for _ in plan]
    j = 0
    for label, syls in syllables_by_block:
        while j < len(plan) and plan[j][0] != label:
            j += 1
        if j == len(plan):
            raise PlanTooShort(f"lyric block [{label}] has no matching section left in the plan")
        segments[j].extend(syls)
        j += 1
    for (label, n), seg in zip(plan, segments):
        if len(seg) > n * slots:
            raise PlanTooShort(f"section {label} has {len(seg)} syllables but only {n * slots} slots")
    return LyricQueue(segments, starts, ends)


def generate(m_cond: NGramModel, m_uncond: NGramModel, prefix: TokenSeq, pq=None,
             cfg: SamplerConfig | None = None, *, vocab: Vocab, plan: Sequence[tuple[str, int]] = (),
             relax_on_deadend: bool = False) -> Iterator[int]:
    """Stream generated token ids following ``prefix``.

    ``pq`` is a :class:`~leadsheet.conditioning.PhonemeQueue` or None for
    instrumental output.  ``plan`` lists (section label, bar count).
    """
    cfg = cfg or SamplerConfig()
    if prefix.vocab_hash != vocab.hash:
        raise VocabMismatch("prefix uses a different vocabulary")
    dec = Decoder(m_cond, m_uncond, vocab, cfg, relax_on_deadend)
    gs, info = header_state(dec.grammar, prefix.tokens)
    slots = min(slots_per_bar_for(info["time_sig"]), vocab.config.positions)
    lyrics = None
    if pq is not None:
        if plan:
            lyrics = plan_queue(pq.blocks(), plan, slots)
        else:
            lyrics = LyricQueue([[s.phonemes for s in pq.syllables]], [0], [math.inf])
    ctl = PlanController(vocab, cfg, lyrics, key=info["key"], slots=slots, plan=plan)
    rng = np.random.default_rng(cfg.seed)
    return dec.run(prefix.tokens, gs, ctl, rng)


def generate_leadsheet(m_cond, m_uncond, prefix: TokenSeq, pq=None, cfg: SamplerConfig | None = None, *,
                       vocab: Vocab, plan=(), relax_on_deadend: bool = False):
    """Run :func:`generate` to completion and decode the result."""
    toks = list(generate(m_cond, m_uncond, prefix, pq, cfg, vocab=vocab, plan=plan,
                         relax_on_deadend=relax_on_deadend))
    full = header_tokens_of(prefix, vocab) + toks
    return decode_ids(full, vocab), TokenSeq(tuple(full), vocab.hash)


def header_tokens_of(prefix: TokenSeq, vocab: Vocab) -> list[int]:
    bos = vocab.token(Family.BOS)
    start = max(i for i, t in enumerate(prefix.tokens) if t == bos)
    return list(prefix.tokens[start:])
