import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from leadsheet.ngram import EmptyCorpus, NGramModel, score, train
from leadsheet.remi import TokenSeq, encode
from leadsheet.vocab import VocabMismatch
from oracles import backoff_dist
from sheets import one_bar_example

BOS, A, B, EOS = 0, 1, 2, 3


def schematic(order=2, seqs=((BOS, A, B, A, B, A, EOS),), size=5):
    m = NGramModel(order, size, 0, BOS)
    for s in seqs:
        m.add(s)
    return m


def test_worked_counts():
    m = schematic()
    assert m.count((), A) == 3
    assert m.count((A,), B) == 2 and m.count((A,), EOS) == 1
    assert m.count((A,), B) / m.count((A,)) == pytest.approx(2 / 3, abs=0)


def test_unseen_context_is_unigram():
    m = schematic()
    assert np.allclose(m.next_dist((4,)), m.unigram(), rtol=0, atol=1e-15)
    assert m.unigram().sum() == pytest.approx(1, abs=1e-12)


def test_empty_corpus(vocab):
    with pytest.raises(EmptyCorpus):
        train([], vocab)


def test_vocab_mismatch(vocab):
    ts = encode(one_bar_example(), vocab)
    with pytest.raises(VocabMismatch):
        train([TokenSeq(ts.tokens, 1)], vocab)
    m = train([ts], vocab)
    with pytest.raises(VocabMismatch):
        score(m, TokenSeq(ts.tokens, 1))


corpora = st.lists(st.lists(st.integers(1, 7), min_size=1, max_size=50).map(lambda s: [BOS] + s), min_size=1,
                   max_size=10)


@given(corpora, st.integers(1, 4), st.lists(st.integers(0, 7), max_size=5))
def test_next_dist_matches_oracle(corpus, order, ctx):
    m = schematic(order, corpus, size=8)
    full = [BOS] + ctx
    got = m.dist_after(full)
    want = backoff_dist(corpus, order, BOS, 8, m.context(full))
    assert np.max(np.abs(got - np.array(want))) <= 1e-12
    assert abs(got.sum() - 1) <= 1e-12


@given(corpora, st.integers(1, 4), st.integers(0, 10))
def test_sharded_training_equals_single_pass(corpus, order, cut):
    cut = min(cut, len(corpus))
    whole = schematic(order, corpus, size=8)
    left = schematic(order, corpus[:cut], size=8)
    right = schematic(order, corpus[cut:], size=8)
    assert left.merge(right).dumps() == whole.dumps()
    assert right.merge(left).dumps() == whole.dumps()


def test_model_file_round_trip(toy_model, tmp_path):
    text = toy_model.dumps()
    assert text.splitlines()[0] == f"NGLM v1 order=4 vocab={toy_model.vocab_hash:016x} genre=all"
    body = text.splitlines()[2:]
    assert body == sorted(body)
    p = tmp_path / "m.nglm"
    toy_model.save(p)
    assert NGramModel.load(p).dumps() == text


def test_training_is_deterministic(toy_sheets, vocab):
    seqs = [encode(s, vocab) for s in toy_sheets]
    assert train(seqs, vocab).dumps() == train(seqs, vocab).dumps()


def test_score_matches_step_oracle(toy_model, vocab):
    toks = encode(one_bar_example(), vocab).tokens
    want = sum(math.log(toy_model.dist_after(toks[:i])[toks[i]]) for i in range(1, len(toks)))
    assert score(toy_model, toks) == pytest.approx(want, abs=1e-12)
    assert score(toy_model, toks[:1]) == 0.0
    single = (toks[1],)
    assert score(toy_model, single) == pytest.approx(math.log(toy_model.unigram()[toks[1]]), abs=1e-15)


def test_score_monotone_in_prefix(toy_model, vocab):
    toks = encode(one_bar_example(), vocab).tokens
    vals = [score(toy_model, toks[:n]) for n in range(1, len(toks) + 1)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
