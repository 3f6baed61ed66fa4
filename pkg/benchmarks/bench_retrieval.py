"""Micro-benchmark: contiguous matrix scoring vs a per-row Python loop.

Measures single-query top-k latency over synthetic stores of increasing
size. The library path scores every candidate with one float64
matrix-vector product over the snapshot's contiguous per-encoder block;
the baseline walks records and computes each cosine separately.

Usage::

    python benchmarks/bench_retrieval.py --sizes 1000,10000,50000 --dim 512 --k 5
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from cytorag import CaseMetadata, CaseRecord, CaseStore, Embedding, top_k


def build_store(n: int, dim: int, seed: int) -> CaseStore:
    rng = np.random.default_rng(seed)
    store = CaseStore()
    store.register_encoder("bench", dim)
    vectors = rng.standard_normal((n, dim)).astype(np.float32)
    for i in range(n):
        store.upsert_case(
            CaseRecord(
                case_id=f"c{i:06d}",
                patient_id=f"p{i % (n // 3 + 1):06d}",
                slide_id=f"s{i:06d}",
                roi_id="r1",
                metadata=CaseMetadata("cyt", "diag", "III", "benign"),
                embeddings={"bench": Embedding("bench", vectors[i])},
            )
        )
    return store


def python_loop_top_k(snapshot, query, k):
    q = [float(x) for x in query.vector]
    qn = math.sqrt(sum(x * x for x in q))
    scored = []
    for case_id in sorted(snapshot.cases):
        vec = snapshot.cases[case_id].embeddings["bench"].vector
        dot = 0.0
        norm = 0.0
        for x, y in zip(vec, q):
            dot += float(x) * y
            norm += float(x) * float(x)
        scored.append((case_id, dot / (math.sqrt(norm) * qn)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def timeit(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,50000")
    parser.add_argument("--dim", type=int, default=512)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--with-baseline", action="store_true",
                        help="also time the per-row Python loop (slow)")
    args = parser.parse_args()

    print(f"dim={args.dim} k={args.k} repeats={args.repeats} (best-of timings)")
    header = "n\tmatrix_ms\tqueries_per_s"
    if args.with_baseline:
        header += "\tloop_ms\tspeedup"
    print(header)
    for n in (int(s) for s in args.sizes.split(",")):
        store = build_store(n, args.dim, args.seed)
        snapshot = store.snapshot()
        query = snapshot.case("c000000").embeddings["bench"]
        snapshot.encoder_block("bench")  # build once, outside the timed region
        matrix_s = timeit(lambda: top_k(query, args.k, snapshot), args.repeats)
        row = f"{n}\t{matrix_s * 1e3:.3f}\t{1.0 / matrix_s:,.0f}"
        if args.with_baseline:
            loop_s = timeit(lambda: python_loop_top_k(snapshot, query, args.k), 1)
            row += f"\t{loop_s * 1e3:.1f}\t{loop_s / matrix_s:,.0f}x"
        print(row)


if __name__ == "__main__":
    main()
