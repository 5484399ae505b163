"""Hot numeric kernels with numba-compiled and pure-numpy variants.

Set LINKGCN_DISABLE_NUMBA=1 to force the numpy fallbacks (or when numba is
not installed). Both paths accumulate dot products in float64 and break
similarity ties by ascending instance id, so results agree across variants
and across thread counts. benchmarks/bench_kernels.py compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("LINKGCN_DISABLE_NUMBA", "").lower() not in ("", "0", "false")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit, prange, set_num_threads  # noqa: F401
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def set_worker_threads(workers: int) -> None:
    if HAS_NUMBA and workers >= 1:
        try:
            set_num_threads(workers)
        except ValueError:
            pass  # more workers than physical threads; numba caps it


# ---------------------------------------------------------------------------
# top-k neighbors by cosine similarity (rows assumed unit-normalized float64)

def _topk_numpy(unit: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    n = unit.shape[0]
    out_idx = np.empty((n, k), dtype=np.int64)
    out_sim = np.empty((n, k), dtype=np.float64)
    block = max(1, min(n, (64 << 20) // (8 * n)))  # cap scratch at ~64MB
    ids = np.arange(n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        sims = unit[start:stop] @ unit.T
        for r in range(start, stop):
            sims[r - start, r] = -np.inf  # self excluded
        for r in range(stop - start):
            # primary key: similarity descending; ties by ascending id
            order = np.lexsort((ids, -sims[r]))[:k]
            out_idx[start + r] = order
            out_sim[start + r] = sims[r, order]
    return out_idx, out_sim


if HAS_NUMBA:

    @njit(parallel=True, cache=True)
    def _topk_numba(unit, k, out_idx, out_sim):  # pragma: no cover - jitted
        n, d = unit.shape
        for i in prange(n):
            idx = out_idx[i]
            sim = out_sim[i]
            filled = 0
            for j in range(n):
                if j == i:
                    continue
                s = 0.0
                for c in range(d):
                    s += unit[i, c] * unit[j, c]
                if filled == k and (s < sim[k - 1] or (s == sim[k - 1] and j > idx[k - 1])):
                    continue
                # insertion keeping sims descending, ids ascending within ties
                pos = filled if filled < k else k - 1
                while pos > 0 and (sim[pos - 1] < s or (sim[pos - 1] == s and idx[pos - 1] > j)):
                    sim[pos] = sim[pos - 1]
                    idx[pos] = idx[pos - 1]
                    pos -= 1
                sim[pos] = s
                idx[pos] = j
                if filled < k:
                    filled += 1


def topk_cosine(unit: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k neighbor ids and similarities per row, self excluded."""
    unit = np.ascontiguousarray(unit, dtype=np.float64)
    if HAS_NUMBA:
        n = unit.shape[0]
        out_idx = np.zeros((n, k), dtype=np.int64)
        out_sim = np.zeros((n, k), dtype=np.float64)
        _topk_numba(unit, k, out_idx, out_sim)
        return out_idx, out_sim
    return _topk_numpy(unit, k)


# ---------------------------------------------------------------------------
# subgraph adjacency from per-node global neighbor lists

def _adjacency_numpy(nodes, nbr_idx, u):
    n = nodes.shape[0]
    pos = {int(v): i for i, v in enumerate(nodes)}
    adj = np.zeros((n, n), dtype=np.float32)
    for q in range(n):
        for r in nbr_idx[nodes[q], :u]:
            p = pos.get(int(r))
            if p is not None and p != q:
                adj[q, p] = 1.0
                adj[p, q] = 1.0
    return adj


if HAS_NUMBA:

    @njit(cache=True)
    def _adjacency_numba(nodes, nbr_idx, u, lookup):  # pragma: no cover - jitted
        n = nodes.shape[0]
        adj = np.zeros((n, n), dtype=np.float32)
        for q in range(n):
            row = nbr_idx[nodes[q]]
            for t in range(u):
                p = lookup[row[t]]
                if p >= 0 and p != q:
                    adj[q, p] = 1.0
                    adj[p, q] = 1.0
        return adj


def subgraph_adjacency(nodes: np.ndarray, nbr_idx: np.ndarray, u: int,
                       lookup: np.ndarray | None = None) -> np.ndarray:
    """Symmetric 0/1 adjacency: edge (q, r) when r is among q's top-u global
    neighbors and both are subgraph nodes. `lookup` is a reusable length-N
    scratch array (filled/cleared here) mapping instance id -> node position."""
    nodes = np.ascontiguousarray(nodes, dtype=np.int64)
    if HAS_NUMBA:
        if lookup is None:
            lookup = np.full(nbr_idx.shape[0], -1, dtype=np.int64)
        lookup[nodes] = np.arange(nodes.shape[0])
        adj = _adjacency_numba(nodes, nbr_idx, u, lookup)
        lookup[nodes] = -1
        return adj
    return _adjacency_numpy(nodes, nbr_idx, u)
