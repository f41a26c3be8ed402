"""Compare the jitted score kernels against their numpy fallbacks.

Runs both implementations on synthetic inputs shaped like real workloads
(sparse level-to-level edges, per-token attention matrices) and prints a
timing table. The jitted path is warmed before timing so compilation cost
is excluded.

Usage: python benchmarks/bench_kernels.py [--nodes 20000] [--repeat 20]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pecan import kernels  # noqa: E402


def make_csr(n_nodes: int, out_degree: int, rng: np.random.Generator):
    indptr = np.arange(0, n_nodes * out_degree + 1, out_degree, dtype=np.int64)
    indices = rng.integers(0, n_nodes, size=n_nodes * out_degree, dtype=np.int64)
    weights = rng.random(n_nodes * out_degree)
    # Row-normalize so magnitudes match production graphs.
    for i in range(n_nodes):
        lo, hi = indptr[i], indptr[i + 1]
        weights[lo:hi] /= weights[lo:hi].sum()
    r = np.zeros(n_nodes)
    visited = rng.choice(n_nodes, size=max(1, n_nodes // 20), replace=False)
    r[visited] = rng.random(visited.size) * 5
    return indptr, indices, weights, r


def make_attention(t_gen: int, k: int, n_spans: int, rng: np.random.Generator):
    attn = rng.random((t_gen, k))
    bounds = np.sort(rng.choice(np.arange(1, t_gen), size=n_spans - 1, replace=False))
    starts = np.concatenate(([0], bounds)).astype(np.int64)
    ends = np.concatenate((bounds, [t_gen])).astype(np.int64)
    return attn, starts, ends


def timeit(fn, *args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=20000)
    parser.add_argument("--out-degree", type=int, default=16)
    parser.add_argument("--t-gen", type=int, default=2000)
    parser.add_argument("--batch-k", type=int, default=64)
    parser.add_argument("--spans", type=int, default=40)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    indptr, indices, weights, r = make_csr(args.nodes, args.out_degree, rng)
    attn, starts, ends = make_attention(args.t_gen, args.batch_k, args.spans, rng)

    rows = []
    if kernels.NUMBA_AVAILABLE:
        kernels.warmup()
        t = timeit(kernels.propagate_scores_numba, indptr, indices, weights, r, repeat=args.repeat)
        rows.append(("propagate_scores", "numba", t))
        t = timeit(kernels.span_means_numba, attn, starts, ends, repeat=args.repeat)
        rows.append(("span_means", "numba", t))
    else:
        print("numba unavailable; timing numpy path only", file=sys.stderr)

    t = timeit(kernels.propagate_scores_numpy, indptr, indices, weights, r, repeat=args.repeat)
    rows.append(("propagate_scores", "numpy", t))
    t = timeit(kernels.span_means_numpy, attn, starts, ends, repeat=args.repeat)
    rows.append(("span_means", "numpy", t))

    z_numpy = kernels.propagate_scores_numpy(indptr, indices, weights, r)
    m_numpy = kernels.span_means_numpy(attn, starts, ends)
    if kernels.NUMBA_AVAILABLE:
        z_numba = kernels.propagate_scores_numba(indptr, indices, weights, r)
        m_numba = kernels.span_means_numba(attn, starts, ends)
        print(f"max |Δz| = {np.abs(z_numpy - z_numba).max():.3e}")
        print(f"max |Δmeans| = {np.abs(m_numpy - m_numba).max():.3e}")

    print(f"\n{'kernel':<20} {'backend':<8} {'best of ' + str(args.repeat):>14}")
    for name, backend, t in rows:
        print(f"{name:<20} {backend:<8} {t * 1e3:>11.3f} ms")

    by_kernel: dict[str, dict[str, float]] = {}
    for name, backend, t in rows:
        by_kernel.setdefault(name, {})[backend] = t
    for name, timings in by_kernel.items():
        if {"numba", "numpy"} <= timings.keys():
            print(f"{name}: numba is {timings['numpy'] / timings['numba']:.1f}x numpy")


if __name__ == "__main__":
    main()
