"""Partition quality: NMI, BCubed precision/recall/F, and the same-identity
kNN linking upper bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from linkgcn.dataset import FeatureSet
from linkgcn.knn import NeighborTable
from linkgcn.merge import _components


@dataclass(frozen=True)
class EvalReport:
    nmi: float
    bcubed_precision: float
    bcubed_recall: float
    bcubed_f: float
    n_evaluated: int

    def as_line(self) -> str:
        return (f"{self.nmi:.6f}\t{self.bcubed_precision:.6f}\t"
                f"{self.bcubed_recall:.6f}\t{self.bcubed_f:.6f}\t{self.n_evaluated}")

    def as_table(self) -> str:
        return ("metric     value\n"
                f"NMI        {self.nmi:.4f}\n"
                f"BCubed P   {self.bcubed_precision:.4f}\n"
                f"BCubed R   {self.bcubed_recall:.4f}\n"
                f"BCubed F   {self.bcubed_f:.4f}\n"
                f"evaluated  {self.n_evaluated}")


def _contingency(truth: np.ndarray, pred: np.ndarray):
    _, ti = np.unique(truth, return_inverse=True)
    _, pi = np.unique(pred, return_inverse=True)
    n_t = ti.max() + 1
    n_p = pi.max() + 1
    table = np.zeros((n_t, n_p), dtype=np.float64)
    np.add.at(table, (ti, pi), 1.0)
    return table


def nmi(truth: np.ndarray, pred: np.ndarray) -> float:
    """Mutual information normalized by the geometric mean of the entropies.

    Conventions for degenerate partitions: if both sides are a single
    cluster (necessarily identical) the score is 1; if exactly one side has
    zero entropy the score is 0.
    """
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    table = _contingency(truth, pred)
    n = table.sum()
    pt = table.sum(axis=1) / n
    pp = table.sum(axis=0) / n
    h_t = -np.sum(pt * np.log(pt, where=pt > 0, out=np.zeros_like(pt)))
    h_p = -np.sum(pp * np.log(pp, where=pp > 0, out=np.zeros_like(pp)))
    if h_t == 0.0 and h_p == 0.0:
        return 1.0
    if h_t == 0.0 or h_p == 0.0:
        return 0.0
    joint = table / n
    ratio = joint / np.outer(pt, pp)
    mi = np.sum(joint * np.log(ratio, where=joint > 0, out=np.zeros_like(joint)))
    return float(mi / np.sqrt(h_t * h_p))


def bcubed(truth: np.ndarray, pred: np.ndarray):
    """Per-instance precision/recall over co-cluster and co-label pairs,
    self-pairs included; F is their harmonic mean."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    table = _contingency(truth, pred)
    n = table.sum()
    class_sizes = table.sum(axis=1)
    cluster_sizes = table.sum(axis=0)
    precision = float(np.sum(table ** 2 / cluster_sizes[None, :]) / n)
    recall = float(np.sum(table ** 2 / class_sizes[:, None]) / n)
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


def evaluate(truth: np.ndarray, pred: np.ndarray,
             distractors: str = "keep") -> EvalReport:
    """Full report. `distractors` controls instances with truth label -1:
    "keep" leaves them as one shared class, "ignore" masks them out, and
    "unique" treats each as its own singleton identity."""
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    if distractors == "ignore":
        mask = truth >= 0
        truth, pred = truth[mask], pred[mask]
    elif distractors == "unique":
        truth = truth.copy()
        neg = np.flatnonzero(truth < 0)
        truth[neg] = truth.max() + 1 + np.arange(neg.size)
    elif distractors != "keep":
        raise ValueError(f"unknown distractor mode {distractors!r}")
    if truth.size == 0:
        raise ValueError("nothing left to evaluate")
    p, r, f = bcubed(truth, pred)
    return EvalReport(nmi=nmi(truth, pred), bcubed_precision=p, bcubed_recall=r,
                      bcubed_f=f, n_evaluated=truth.size)


def knn_upper_bound(fs: FeatureSet, nbrs: NeighborTable, k_list) -> list:
    """Clustering score when every same-identity kNN pair is linked.

    Returns [(k, EvalReport)] for each requested k. The linked edge set
    grows with k, so F is non-decreasing.
    """
    if fs.labels is None:
        raise ValueError("upper bound needs identity labels")
    out = []
    labels = fs.labels
    for k in k_list:
        if k > nbrs.k:
            raise ValueError(f"k={k} exceeds neighbor table k={nbrs.k}")
        src = np.repeat(np.arange(fs.n), k)
        dst = nbrs.indices[:, :k].ravel()
        same = (labels[src] == labels[dst]) & (labels[src] >= 0)
        pred = _components(fs.n, src[same], dst[same])
        out.append((int(k), evaluate(labels, pred, distractors="unique")))
    return out
