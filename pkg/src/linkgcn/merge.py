"""Turn per-pivot linkage likelihoods into a global partition."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from linkgcn.dataset import FeatureSet
from linkgcn.knn import NeighborTable


@dataclass(frozen=True)
class WeightedEdgeSet:
    """Unique undirected edges (i < j) weighted by linkage likelihood."""

    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        i = np.ascontiguousarray(self.i, dtype=np.int64)
        j = np.ascontiguousarray(self.j, dtype=np.int64)
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if not (i.shape == j.shape == w.shape):
            raise ValueError("edge arrays must share a shape")
        if np.any(i >= j):
            raise ValueError("edges must be canonical with i < j")
        if w.size and (w.min() < 0.0 or w.max() > 1.0):
            raise ValueError("edge weights must lie in [0, 1]")
        keys = i * (j.max() + 1 if j.size else 1) + j
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate edge")
        for arr in (i, j, w):
            arr.setflags(write=False)
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.i.shape[0]


def canonical_labels(assignment: np.ndarray) -> np.ndarray:
    """Relabel clusters densely, ordered by each cluster's smallest member."""
    assignment = np.asarray(assignment)
    _, first, inverse = np.unique(assignment, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))  # rank of each cluster's first occurrence
    # first occurrence order equals smallest-member order for a total assignment
    return order[inverse].astype(np.int64)


def pool_edges(pivots, hop1_nodes, likelihoods) -> WeightedEdgeSet:
    """Collect pivot->neighbor predictions into one undirected edge pool.

    When both directions of a pair were predicted, the larger likelihood
    wins. Output is independent of pivot order.
    """
    best: dict = {}
    for pivot, nodes, probs in zip(pivots, hop1_nodes, likelihoods):
        for q, w in zip(nodes, probs):
            a, b = (int(pivot), int(q)) if pivot < q else (int(q), int(pivot))
            key = (a, b)
            w = float(w)
            if key not in best or w > best[key]:
                best[key] = w
    if not best:
        return WeightedEdgeSet(i=np.empty(0, np.int64), j=np.empty(0, np.int64),
                               w=np.empty(0, np.float64))
    items = sorted(best.items())
    ij = np.asarray([k for k, _ in items], dtype=np.int64)
    return WeightedEdgeSet(i=ij[:, 0], j=ij[:, 1],
                           w=np.asarray([v for _, v in items], dtype=np.float64))


def _components(n: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Connected-component labels by BFS, components numbered by smallest member."""
    adj_start = np.zeros(n + 1, dtype=np.int64)
    both_src = np.concatenate([src, dst])
    both_dst = np.concatenate([dst, src])
    order = np.argsort(both_src, kind="stable")
    both_src = both_src[order]
    both_dst = both_dst[order]
    np.add.at(adj_start, both_src + 1, 1)
    adj_start = np.cumsum(adj_start)
    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    queue = deque()
    for s in range(n):
        if labels[s] >= 0:
            continue
        labels[s] = next_label
        queue.append(s)
        while queue:
            v = queue.popleft()
            for t in both_dst[adj_start[v]:adj_start[v + 1]]:
                if labels[t] < 0:
                    labels[t] = next_label
                    queue.append(t)
        next_label += 1
    return labels


def bfs_cluster(edges: WeightedEdgeSet, tau: float, n: int) -> np.ndarray:
    """Components of the graph keeping edges with weight >= tau."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau={tau} outside [0, 1]")
    keep = edges.w >= tau
    return _components(n, edges.i[keep], edges.j[keep])


def propagate_cluster(edges: WeightedEdgeSet, n: int, tau0: float = 0.5,
                      dtau: float = 0.05, max_size: int = 600) -> np.ndarray:
    """Iterative pseudo-label propagation.

    Each round cuts edges below a threshold that rises by dtau; components
    no larger than max_size are finalized, larger ones are re-queued. Once
    the threshold passes 1 every component is a singleton, so the loop
    terminates within ceil((1 - tau0) / dtau) + 2 rounds.
    """
    if not (0.0 <= tau0 < 1.0):
        raise ValueError(f"tau0={tau0} outside [0, 1)")
    if dtau <= 0.0:
        raise ValueError(f"dtau={dtau} must be positive")
    if max_size < 1:
        raise ValueError(f"max_size={max_size} must be >= 1")

    assignment = np.full(n, -1, dtype=np.int64)
    queued = np.ones(n, dtype=bool)
    next_label = 0
    t = 0
    while queued.any():
        tau = tau0 + t * dtau
        active = queued & np.ones(n, dtype=bool)
        keep = (edges.w >= tau) & active[edges.i] & active[edges.j]
        comp = _components(n, edges.i[keep], edges.j[keep])
        comp[~active] = -1
        sizes = np.bincount(comp[active], minlength=comp.max() + 1 if active.any() else 0)
        for c in np.unique(comp[active]):
            members = np.flatnonzero(comp == c)
            if sizes[c] <= max_size or tau > 1.0:
                assignment[members] = next_label
                next_label += 1
                queued[members] = False
        t += 1
    return canonical_labels(assignment)


def filter_singletons(assignment: np.ndarray):
    """Mask out size-1 clusters; returns (keep mask, fraction removed)."""
    assignment = np.asarray(assignment)
    sizes = np.bincount(assignment)
    mask = sizes[assignment] > 1
    return mask, float(np.sum(~mask)) / assignment.shape[0]


def threshold_baseline(fs: FeatureSet, nbrs: NeighborTable, tau_sim: float) -> np.ndarray:
    """Non-learned comparator: link kNN pairs whose raw cosine similarity
    clears a global threshold, then take components."""
    keep = nbrs.similarities.astype(np.float64) >= tau_sim
    src = np.repeat(np.arange(fs.n), nbrs.k)[keep.ravel()]
    dst = nbrs.indices.ravel()[keep.ravel()]
    return _components(fs.n, src, dst)


# ---------------------------------------------------------------------------
# text IO

def save_partition(assignment: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for i, c in enumerate(assignment):
            fh.write(f"{i}\t{int(c)}\n")


def load_partition(path) -> np.ndarray:
    ids, clusters = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b = line.split("\t")
            ids.append(int(a))
            clusters.append(int(b))
    out = np.empty(len(ids), dtype=np.int64)
    out[np.asarray(ids)] = np.asarray(clusters)
    return out


def save_edges(edges: WeightedEdgeSet, path) -> None:
    with open(path, "w") as fh:
        for a, b, w in zip(edges.i, edges.j, edges.w):
            fh.write(f"{int(a)}\t{int(b)}\t{w:.6f}\n")
