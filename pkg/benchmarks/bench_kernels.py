"""Compare the numba-compiled kernels against the pure-numpy fallbacks.

Runs each kernel through both code paths on the same inputs, checks that the
outputs agree exactly, and prints a timing table. The numpy path is selected
by re-importing linkgcn._kernels with LINKGCN_DISABLE_NUMBA=1 in a
subprocess-free way: both variants are reachable directly as module-private
functions, so we call them explicitly here.

Usage: python3 benchmarks/bench_kernels.py [--n 4000] [--dim 64] [--k 80]
"""

import argparse
import time

import numpy as np

from linkgcn import _kernels
from linkgcn.config import seed_stream


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_topk(n, dim, k):
    rng = seed_stream(0, "data")
    X = rng.standard_normal((n, dim))
    unit = X / np.linalg.norm(X, axis=1, keepdims=True)

    t_np, (idx_np, sim_np) = timeit(lambda: _kernels._topk_numpy(unit, k))
    if not _kernels.HAS_NUMBA:
        print(f"topk_cosine    numpy {t_np * 1e3:9.1f} ms   (numba unavailable)")
        return

    out_idx = np.zeros((n, k), dtype=np.int64)
    out_sim = np.zeros((n, k), dtype=np.float64)
    _kernels._topk_numba(unit, k, out_idx, out_sim)  # warm the JIT

    def run_numba():
        oi = np.zeros((n, k), dtype=np.int64)
        os_ = np.zeros((n, k), dtype=np.float64)
        _kernels._topk_numba(unit, k, oi, os_)
        return oi, os_

    t_nb, (idx_nb, sim_nb) = timeit(run_numba)
    assert np.array_equal(idx_np, idx_nb), "neighbor ids disagree"
    assert np.allclose(sim_np, sim_nb, atol=1e-12), "similarities disagree"
    print(f"topk_cosine    numpy {t_np * 1e3:9.1f} ms   numba {t_nb * 1e3:9.1f} ms"
          f"   speedup {t_np / t_nb:5.1f}x   (outputs identical)")


def bench_adjacency(n, k, u, n_subgraphs=2000, sub_size=120):
    rng = seed_stream(1, "data")
    nbr_idx = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        nbr_idx[i] = rng.choice(n - 1, size=k, replace=False)
        nbr_idx[i][nbr_idx[i] >= i] += 1  # never self
    node_sets = [np.sort(rng.choice(n, size=sub_size, replace=False))
                 for _ in range(n_subgraphs)]

    def run_numpy():
        return [_kernels._adjacency_numpy(nodes, nbr_idx, u) for nodes in node_sets]

    t_np, out_np = timeit(run_numpy, repeats=2)
    if not _kernels.HAS_NUMBA:
        print(f"adjacency      numpy {t_np * 1e3:9.1f} ms   (numba unavailable)")
        return

    lookup = np.full(n, -1, dtype=np.int64)
    _kernels.subgraph_adjacency(node_sets[0], nbr_idx, u, lookup)  # warm the JIT

    def run_numba():
        out = []
        for nodes in node_sets:
            lookup[nodes] = np.arange(nodes.shape[0])
            out.append(_kernels._adjacency_numba(nodes, nbr_idx, u, lookup))
            lookup[nodes] = -1
        return out

    t_nb, out_nb = timeit(run_numba, repeats=2)
    for a, b in zip(out_np, out_nb):
        assert np.array_equal(a, b), "adjacency matrices disagree"
    print(f"adjacency      numpy {t_np * 1e3:9.1f} ms   numba {t_nb * 1e3:9.1f} ms"
          f"   speedup {t_np / t_nb:5.1f}x   (outputs identical)")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=4000)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--k", type=int, default=80)
    parser.add_argument("--u", type=int, default=5)
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    _kernels.set_worker_threads(args.workers)
    print(f"N={args.n} D={args.dim} k={args.k} u={args.u} "
          f"numba={'on' if _kernels.HAS_NUMBA else 'off'}")
    bench_topk(args.n, args.dim, args.k)
    bench_adjacency(args.n, args.k, args.u)


if __name__ == "__main__":
    main()
