"""Compare the compiled transport kernel against the numpy fallback.

Usage: python benchmarks/bench_ot.py [pairs]
"""

from __future__ import annotations

import sys
import time

import numpy as np

from taskpace._transport_py import monotone_cost as py_cost
from taskpace.ot import BACKEND

try:
    from taskpace._transport_c import monotone_cost as c_cost
except ImportError:
    c_cost = None


def random_hist(rng, m):
    h = rng.random(m)
    return h / h.sum()


def bench(fn, pairs, centers):
    start = time.perf_counter()
    total = 0.0
    for a, b in pairs:
        total += fn(a, b, centers)
    elapsed = time.perf_counter() - start
    return elapsed / len(pairs), total


def main():
    n_pairs = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    rng = np.random.default_rng(7)
    print(f"active backend at import: {BACKEND}")
    for m in (100, 200):
        centers = (np.arange(m) + 0.5) / m
        pairs = [(random_hist(rng, m), random_hist(rng, m)) for _ in range(n_pairs)]
        per_py, tot_py = bench(py_cost, pairs, centers)
        print(f"M={m}: numpy fallback  {per_py * 1e6:8.1f} us/pair")
        if c_cost is not None:
            per_c, tot_c = bench(c_cost, pairs, centers)
            print(f"M={m}: compiled       {per_c * 1e6:8.1f} us/pair  (x{per_py / per_c:.1f})")
            assert abs(tot_py - tot_c) < 1e-9 * n_pairs, "backends disagree"
        else:
            print(f"M={m}: compiled kernel not built")


if __name__ == "__main__":
    main()
