"""Count-based next-token model with stupid backoff."""

from __future__ import annotations

import math
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .remi import TokenSeq
from .vocab import Vocab, VocabMismatch

DEFAULT_ORDER = 4
DEFAULT_ALPHA = 0.4


class EmptyCorpus(ValueError):
    pass


class NGramModel:
    """Counts for every order 1..N over BOS-padded training sequences.

    ``tables[L]`` maps a context tuple of length ``L`` to a ``Counter`` of
    next-token counts; ``tables[0][()]`` is the unigram table.
    """

    def __init__(self, order: int, vocab_size: int, vocab_hash: int, bos: int, genre: str = "all",
                 tables: list[dict[tuple, Counter]] | None = None):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.vocab_size = vocab_size
        self.vocab_hash = vocab_hash
        self.bos = bos
        self.genre = genre
        self.tables = tables if tables is not None else [dict() for _ in range(order)]
        self._cache: dict[tuple, np.ndarray] = {}
        self._unigram: np.ndarray | None = None

    # -- training ------------------------------------------------------------

    def add(self, tokens: Sequence[int]) -> None:
        toks = list(tokens)
        pad = [self.bos] * (self.order - 1)
        if toks and toks[0] == self.bos:
            ext, targets = pad + toks[1:], toks[1:]
        else:
            ext, targets = pad + toks, toks
        base = len(pad)
        for i, t in enumerate(targets):
            idx = base + i
            for L in range(self.order):
                ctx = tuple(ext[idx - L:idx])
                self.tables[L].setdefault(ctx, Counter())[t] += 1
        self._cache.clear()
        self._unigram = None

    def merge(self, other: "NGramModel") -> "NGramModel":
        """Sum of the two count tables as a new model."""
        if (other.order, other.vocab_hash, other.vocab_size) != (self.order, self.vocab_hash, self.vocab_size):
            raise VocabMismatch("cannot merge models with different order or vocabulary")
        tables = [dict() for _ in range(self.order)]
        for L in range(self.order):
            for src in (self.tables[L], other.tables[L]):
                for ctx, counter in src.items():
                    tables[L].setdefault(ctx, Counter()).update(counter)
        genre = self.genre if self.genre == other.genre else "all"
        return NGramModel(self.order, self.vocab_size, self.vocab_hash, self.bos, genre, tables)

    # -- queries ---------------------------------------------------------------

    def context(self, history: Sequence[int]) -> tuple[int, ...]:
        """Conditioning context for the token following ``history``."""
        n = self.order - 1
        if n == 0:
            return ()
        hist = list(history[-n:]) if len(history) else []
        if history and history[0] == self.bos and len(hist) < n:
            hist = [self.bos] * (n - len(hist)) + hist
        return tuple(hist)

    def count(self, ctx: Sequence[int], tok: int | None = None) -> int:
        """Count of ``ctx`` followed by ``tok`` (or by anything if ``tok`` is None)."""
        table = self.tables[len(ctx)].get(tuple(ctx))
        if table is None:
            return 0
        return sum(table.values()) if tok is None else table.get(tok, 0)

    def unigram(self) -> np.ndarray:
        if self._unigram is None:
            counts = np.ones(self.vocab_size)
            for t, c in self.tables[0].get((), Counter()).items():
                counts[t] += c
            self._unigram = counts / counts.sum()
        return self._unigram

    def next_dist(self, context: Sequence[int], alpha: float = DEFAULT_ALPHA) -> np.ndarray:
        """Renormalized stupid-backoff distribution over the next token."""
        ctx = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        key = (ctx, alpha)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ids, counts, totals, offsets = [], [], [], [0]
        for L in range(1, len(ctx) + 1):
            table = self.tables[L].get(ctx[len(ctx) - L:])
            if table:
                items = sorted(table.items())
                ids.extend(t for t, _ in items)
                counts.extend(c for _, c in items)
                totals.append(sum(table.values()))
            else:
                totals.append(0)
            offsets.append(len(ids))
        dist = _kernels.backoff(
            self.unigram(),
            np.asarray(ids, dtype=np.int64),
            np.asarray(counts, dtype=np.float64),
            np.asarray(totals, dtype=np.float64),
            np.asarray(offsets, dtype=np.int64),
            alpha,
        )
        if len(self._cache) > 200_000:
            self._cache.clear()
        self._cache[key] = dist
        return dist

    def dist_after(self, history: Sequence[int], alpha: float = DEFAULT_ALPHA) -> np.ndarray:
        return self.next_dist(self.context(history), alpha)

    # -- persistence -------------------------------------------------------------

    def lines(self) -> list[str]:
        out = []
        for L in range(self.order):
            for ctx, counter in self.tables[L].items():
                c = " ".join(map(str, ctx))
                out.extend(f"{c}\t{t}\t{n}" for t, n in counter.items())
        out.sort()
        return out

    def dumps(self) -> str:
        head = f"NGLM v1 order={self.order} vocab={self.vocab_hash:016x} genre={self.genre}"
        extra = f"#size={self.vocab_size} bos={self.bos}"
        return "\n".join([head, extra, *self.lines()]) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "NGramModel":
        lines = text.splitlines()
        head = lines[0].split()
        if head[:2] != ["NGLM", "v1"]:
            raise ValueError("not an NGLM v1 model file")
        fields = dict(f.split("=", 1) for f in head[2:])
        extra = dict(f.split("=", 1) for f in lines[1].lstrip("#").split())
        model = cls(int(fields["order"]), int(extra["size"]), int(fields["vocab"], 16), int(extra["bos"]),
                    fields["genre"])
        for line in lines[2:]:
            ctx_s, tok, n = line.split("\t")
            ctx = tuple(int(x) for x in ctx_s.split()) if ctx_s else ()
            model.tables[len(ctx)].setdefault(ctx, Counter())[int(tok)] = int(n)
        return model

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def train(corpus: Iterable[TokenSeq], vocab: Vocab, order: int = DEFAULT_ORDER, genre: str = "all") -> NGramModel:
    from .vocab import Family

    model = NGramModel(order, vocab.size, vocab.hash, vocab.token(Family.BOS), genre)
    n = 0
    for ts in corpus:
        if ts.vocab_hash != vocab.hash:
            raise VocabMismatch("training sequence uses a different vocabulary")
        model.add(ts.tokens)
        n += 1
    if n == 0:
        raise EmptyCorpus("training corpus is empty")
    return model


def score(model: NGramModel, ts: TokenSeq | Sequence[int], alpha: float = DEFAULT_ALPHA,
          start: int = 0, end: int | None = None) -> float:
    """Log-likelihood of the tokens in ``[start, end)`` given everything before them.

    A leading BOS is treated as given and never scored.
    """
    if isinstance(ts, TokenSeq):
        if ts.vocab_hash != model.vocab_hash:
            raise VocabMismatch("sequence and model use different vocabularies")
        toks = ts.tokens
    else:
        toks = tuple(ts)
    end = len(toks) if end is None else end
    first = max(start, 1 if toks and toks[0] == model.bos else 0)
    total = 0.0
    for i in range(first, end):
        p = model.dist_after(toks[:i], alpha)[toks[i]]
        total += math.log(p)
    return total
