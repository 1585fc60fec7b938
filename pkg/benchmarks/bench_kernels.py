"""Time the numba and numpy kernel paths on small and large inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times one end-to-end generation run per path in a subprocess, since the
path is fixed at import time by LEADSHEET_NO_NUMBA.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from leadsheet import _kernels


def cases(rng):
    V = 365
    small_a, small_b = rng.integers(0, 30, 12), rng.integers(0, 30, 12)
    big_a, big_b = rng.integers(0, 30, 2000), rng.integers(0, 30, 2000)
    c, u = rng.dirichlet(np.ones(V)), rng.dirichlet(np.ones(V))
    uni = rng.dirichlet(np.ones(V))
    ids = np.sort(rng.choice(V, 40, replace=False)).astype(np.int64)
    counts = rng.integers(1, 9, 40).astype(np.float64)
    totals = np.array([counts[:10].sum(), 0.0, counts[10:].sum()])
    offsets = np.array([0, 10, 10, 40], dtype=np.int64)
    return {
        "edit_distance n=12": ("edit_distance", (small_a, small_b)),
        "edit_distance n=2000": ("edit_distance", (big_a, big_b)),
        "lcs_length n=2000": ("lcs_length", (big_a, big_b)),
        "blend V=365": ("blend", (c, u, 2.0)),
        "backoff V=365": ("backoff", (uni, ids, counts, totals, offsets, 0.4)),
        "top_k_sample V=365": ("top_k_sample", (c, 32, 1.0, 0.37)),
    }


GEN_SNIPPET = """
import sys, time
sys.path.insert(0, {tests!r})
from sheets import toy_corpus
from leadsheet.vocab import build_vocab
from leadsheet.remi import encode
from leadsheet.ngram import train
from leadsheet.generator import SamplerConfig, generate_leadsheet
from leadsheet.conditioning import StylePrompt, build_prefix, default_plan, g2p, parse_lyrics
v = build_vocab()
m = train([encode(s, v) for s in toy_corpus(5)], v)
lp = parse_lyrics("[verse] hello world la la love\\n[chorus] la la moon night")
pq = g2p(lp)
plan = default_plan(lp, pq)
generate_leadsheet(m, m, build_prefix(StylePrompt(), v, pq), pq, SamplerConfig(), vocab=v, plan=plan)
t = time.perf_counter()
for seed in range(20):
    generate_leadsheet(m, m, build_prefix(StylePrompt(), v, pq), pq, SamplerConfig(seed=seed), vocab=v, plan=plan)
print(time.perf_counter() - t)
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if not _kernels.NUMBA_AVAILABLE:
        print("numba not installed; only the numpy path is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'numpy us':>10s} {'numba us':>10s} {'speedup':>8s}")
    for label, (name, argv) in cases(rng).items():
        np_fn = _kernels.NUMPY_KERNELS[name]
        t_np = min(timeit.repeat(lambda: np_fn(*argv), number=args.repeat, repeat=3)) / args.repeat * 1e6
        if _kernels.NUMBA_AVAILABLE:
            nb_fn = _kernels.NUMBA_KERNELS[name]
            nb_fn(*argv)  # compile
            t_nb = min(timeit.repeat(lambda: nb_fn(*argv), number=args.repeat, repeat=3)) / args.repeat * 1e6
            print(f"{label:24s} {t_np:10.1f} {t_nb:10.1f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{label:24s} {t_np:10.1f} {'-':>10s}")

    tests = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "tests")
    for flag in ("0", "1"):
        env = {**os.environ, "LEADSHEET_NO_NUMBA": flag}
        out = subprocess.run([sys.executable, "-c", GEN_SNIPPET.format(tests=tests)], env=env,
                             capture_output=True, text=True, check=True)
        path = "numba" if flag == "0" and _kernels.NUMBA_AVAILABLE else "numpy"
        print(f"20 generations, {path} path: {float(out.stdout):.2f} s")


if __name__ == "__main__":
    main()
