import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from leadsheet.grammar import Grammar, GrammarState, Phase, Reject
from leadsheet.remi import encode
from leadsheet.vocab import Family, build_vocab
from sheets import one_bar_example, random_sheet

V = build_vocab()
G = Grammar(V)


def brute_force(s: GrammarState) -> np.ndarray:
    out = np.zeros(V.size, dtype=bool)
    for t in range(V.size):
        try:
            G.step(s, t)
            out[t] = True
        except Reject:
            pass
    return out


def random_walk_states(rng: random.Random, max_len: int = 120):
    s = G.initial()
    states = [s]
    for _ in range(max_len):
        allowed = np.flatnonzero(G.mask(s))
        s = G.step(s, int(rng.choice(allowed)))
        states.append(s)
        if s.terminal:
            break
    return states


def test_step_header():
    s = G.step(G.initial(), V.id("BOS"))
    assert s.phase is Phase.EXPECT_TEMPO
    assert G.step(s, V.id("Tempo_20")).phase is Phase.EXPECT_TIMESIG


def test_mask_examples():
    s = G.step(G.initial(), V.id("BOS"))
    m = G.mask(s)
    assert m.sum() == 50 and all(V.family(int(t)) is Family.TEMPO for t in np.flatnonzero(m))
    toks = [V.id(n) for n in "BOS Tempo_20 TimeSig_4/4 Key_0_major Bar Track_Chord Pos_0 ChordRoot_0".split()]
    m = G.mask(G.run(toks))
    assert m.sum() == 8 and all(V.family(int(t)) is Family.CHORD_QUAL for t in np.flatnonzero(m))


def test_position_decrease_rejected():
    toks = [V.id(n) for n in "BOS Tempo_20 TimeSig_4/4 Key_0_major Bar Track_Vocal Pos_8 Pitch_60 Dur_2".split()]
    s = G.run(toks)
    with pytest.raises(Reject, match="decreased"):
        G.step(s, V.id("Pos_4"))


def test_track_rank_must_increase():
    toks = [V.id(n) for n in "BOS Tempo_20 TimeSig_4/4 Key_0_major Bar Track_Vocal Pos_0 Pitch_60 Dur_2".split()]
    with pytest.raises(Reject):
        G.step(G.run(toks), V.id("Track_Chord"))


def test_validate_reports_index():
    ts = encode(one_bar_example(), V).tokens
    assert G.validate(ts)
    bad = list(ts)
    bad[3] = V.id("Bar")
    verdict = G.validate(bad)
    assert not verdict and verdict.index == 3
    assert G.validate(ts[:-1]).index == len(ts) - 1


def test_out_of_range_id():
    with pytest.raises(Reject):
        G.step(G.initial(), V.size)


def test_mask_matches_brute_force_on_walks():
    rng = random.Random(0)
    for _ in range(10):
        for s in random_walk_states(rng)[::3]:
            assert np.array_equal(G.mask(s), brute_force(s)), s


def test_mask_matches_brute_force_on_encodings():
    rng = random.Random(1)
    for _ in range(5):
        s = G.initial()
        for t in encode(random_sheet(rng, max_events=40), V).tokens:
            assert np.array_equal(G.mask(s), brute_force(s))
            s = G.step(s, t)


@given(st.integers(0, 2**32 - 1))
def test_mask_nonempty_on_reachable_states(seed):
    for s in random_walk_states(random.Random(seed), 60):
        if not s.terminal:
            assert G.mask(s).any()


def test_out_of_mask_substitution_rejected_at_index():
    rng = random.Random(2)
    for _ in range(200):
        ts = list(encode(random_sheet(rng, max_events=30), V).tokens)
        i = rng.randrange(len(ts))
        s = G.run(ts[:i])
        banned = np.flatnonzero(~G.mask(s))
        ts[i] = int(rng.choice(banned))
        assert G.validate(ts).index == i
