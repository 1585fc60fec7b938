"""Numeric inner loops.

Each kernel has a loop form compiled with ``numba.njit`` and a vectorized
numpy form.  The numba path is used when numba imports and the environment
variable ``LEADSHEET_NO_NUMBA`` is unset or ``0``; both paths return identical
results and are tested against each other.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("LEADSHEET_NO_NUMBA", "0") in ("", "0")


# -- loop forms (compiled by numba) ------------------------------------------


def _edit_distance_loops(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = prev[j - 1] + cost
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def _lcs_length_loops(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[m]


def _blend_loops(cond, uncond, gamma):
    n = cond.shape[0]
    w_u = 1.0 - gamma
    logp = np.empty(n)
    top = -np.inf
    for i in range(n):
        if (gamma != 0.0 and cond[i] <= 0.0) or (w_u != 0.0 and uncond[i] <= 0.0):
            logp[i] = -np.inf
            continue
        v = 0.0
        if gamma != 0.0:
            v += gamma * np.log(cond[i])
        if w_u != 0.0:
            v += w_u * np.log(uncond[i])
        logp[i] = v
        if v > top:
            top = v
    out = np.zeros(n)
    if top == -np.inf:
        return out
    total = 0.0
    for i in range(n):
        if logp[i] != -np.inf:
            out[i] = np.exp(logp[i] - top)
            total += out[i]
    for i in range(n):
        out[i] /= total
    return out


def _backoff_loops(unigram, ids, counts, totals, offsets, alpha):
    score = unigram.copy()
    for level in range(totals.shape[0]):
        lo, hi = offsets[level], offsets[level + 1]
        if totals[level] == 0:
            for t in range(score.shape[0]):
                score[t] *= alpha
            continue
        nxt = score * alpha
        for k in range(lo, hi):
            nxt[ids[k]] = counts[k] / totals[level]
        score = nxt
    total = 0.0
    for t in range(score.shape[0]):
        total += score[t]
    return score / total


def _top_k_sample_loops(weights, k, inv_temp, u):
    order = np.argsort(-weights, kind="mergesort")
    n = 0
    for i in range(order.shape[0]):
        if weights[order[i]] > 0.0:
            n += 1
    if n == 0:
        return -1
    if k < n:
        n = k
    top = weights[order[0]]
    p = np.empty(n)
    total = 0.0
    for i in range(n):
        p[i] = np.exp(inv_temp * (np.log(weights[order[i]]) - np.log(top)))
        total += p[i]
    target = u * total
    acc = 0.0
    for i in range(n):
        acc += p[i]
        if target < acc:
            return order[i]
    return order[n - 1]


# -- numpy forms --------------------------------------------------------------


def _edit_distance_numpy(a, b):
    m = b.shape[0]
    offs = np.arange(m + 1)
    row = offs.copy()
    for i in range(1, a.shape[0] + 1):
        tmp = np.empty(m + 1, dtype=np.int64)
        tmp[0] = i
        tmp[1:] = np.minimum(row[1:] + 1, row[:-1] + (b != a[i - 1]))
        row = np.minimum.accumulate(tmp - offs) + offs
    return row[m]


def _lcs_length_numpy(a, b):
    m = b.shape[0]
    row = np.zeros(m + 1, dtype=np.int64)
    for i in range(a.shape[0]):
        tmp = np.empty(m + 1, dtype=np.int64)
        tmp[0] = 0
        tmp[1:] = np.where(b == a[i], row[:-1] + 1, row[1:])
        row = np.maximum.accumulate(tmp)
    return row[m]


def _blend_numpy(cond, uncond, gamma):
    w_u = 1.0 - gamma
    dead = np.zeros(cond.shape[0], dtype=bool)
    logp = np.zeros(cond.shape[0])
    with np.errstate(divide="ignore"):
        if gamma != 0.0:
            dead |= cond <= 0.0
            logp += gamma * np.log(np.where(cond > 0.0, cond, 1.0))
        if w_u != 0.0:
            dead |= uncond <= 0.0
            logp += w_u * np.log(np.where(uncond > 0.0, uncond, 1.0))
    out = np.zeros(cond.shape[0])
    if dead.all():
        return out
    live = ~dead
    out[live] = np.exp(logp[live] - logp[live].max())
    return out / out.sum()


def _backoff_numpy(unigram, ids, counts, totals, offsets, alpha):
    score = unigram.copy()
    for level in range(totals.shape[0]):
        score = score * alpha
        if totals[level]:
            lo, hi = offsets[level], offsets[level + 1]
            score[ids[lo:hi]] = counts[lo:hi] / totals[level]
    return score / score.sum()


def _top_k_sample_numpy(weights, k, inv_temp, u):
    order = np.argsort(-weights, kind="mergesort")
    n = min(int(np.count_nonzero(weights > 0.0)), k)
    if n == 0:
        return -1
    sel = weights[order[:n]]
    p = np.exp(inv_temp * (np.log(sel) - np.log(sel[0])))
    cum = np.cumsum(p)
    i = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return int(order[min(i, n - 1)])


NUMPY_KERNELS = {
    "edit_distance": _edit_distance_numpy,
    "lcs_length": _lcs_length_numpy,
    "blend": _blend_numpy,
    "backoff": _backoff_numpy,
    "top_k_sample": _top_k_sample_numpy,
}

if NUMBA_AVAILABLE:
    NUMBA_KERNELS = {
        "edit_distance": numba.njit(cache=True)(_edit_distance_loops),
        "lcs_length": numba.njit(cache=True)(_lcs_length_loops),
        "blend": numba.njit(cache=True)(_blend_loops),
        "backoff": numba.njit(cache=True)(_backoff_loops),
        "top_k_sample": numba.njit(cache=True)(_top_k_sample_loops),
    }
else:  # pragma: no cover
    NUMBA_KERNELS = {}

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def _ints(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.int64)


def edit_distance(a, b) -> int:
    """Unit-cost Levenshtein distance between two integer sequences."""
    return int(_ACTIVE["edit_distance"](_ints(a), _ints(b)))


def lcs_length(a, b) -> int:
    return int(_ACTIVE["lcs_length"](_ints(a), _ints(b)))


def blend(cond: np.ndarray, uncond: np.ndarray, gamma: float) -> np.ndarray:
    return _ACTIVE["blend"](np.ascontiguousarray(cond, dtype=np.float64),
                            np.ascontiguousarray(uncond, dtype=np.float64), float(gamma))


def backoff(unigram, ids, counts, totals, offsets, alpha: float) -> np.ndarray:
    return _ACTIVE["backoff"](unigram, ids, counts, totals, offsets, float(alpha))


def top_k_sample(weights: np.ndarray, k: int, temperature: float, u: float) -> int:
    return int(_ACTIVE["top_k_sample"](np.ascontiguousarray(weights, dtype=np.float64), int(k),
                                       1.0 / float(temperature), float(u)))
