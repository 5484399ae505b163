"""Graph-convolution link predictor with hand-written reverse-mode gradients.

Each layer computes Y = relu([X | G X] W) where G mixes neighbor features.
Three aggregation matrices are supported: degree-normalized mean, cosine
softmax weights, and a learned attention MLP over edge endpoint pairs.
A linear 2-class head plus softmax turns the last layer's node features
into linkage likelihoods; loss and predictions cover 1-hop nodes only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from linkgcn.dataset import FormatError
from linkgcn.ips import InstancePivotSubgraph

AGGREGATORS = ("mean", "weighted", "attention")
GCNM_MAGIC = b"GCNM"
GCNM_VERSION = 1
_AGG_TAG = {name: i for i, name in enumerate(AGGREGATORS)}


@dataclass
class GcnModel:
    aggregator: str
    layer_weights: list          # each 2*d_in x d_out
    head_weight: np.ndarray      # d_last x 2
    head_bias: np.ndarray        # (2,)
    attention_mlp: list | None = None  # per layer (2*d_in x m, m x 1)
    mean_row_normalized: bool = False

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.aggregator == "attention" and (
                self.attention_mlp is None or len(self.attention_mlp) != len(self.layer_weights)):
            raise ValueError("attention aggregator needs one MLP per layer")
        for arr in self.parameters():
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite model parameter")

    @property
    def layer_dims(self) -> list:
        dims = [self.layer_weights[0].shape[0] // 2]
        dims += [w.shape[1] for w in self.layer_weights]
        return dims

    @property
    def dtype(self):
        return self.layer_weights[0].dtype

    def parameters(self) -> list:
        """Trainable arrays in a fixed order (shared with gradients)."""
        out = list(self.layer_weights) + [self.head_weight, self.head_bias]
        if self.attention_mlp is not None:
            for w1, w2 in self.attention_mlp:
                out += [w1, w2]
        return out


def _glorot(rng, fan_in, fan_out, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def init_model(dims, aggregator: str, rng: np.random.Generator,
               attention_hidden: int = 64, dtype=np.float32,
               mean_row_normalized: bool = False) -> GcnModel:
    """Fresh model for input width dims[0] and layer widths dims[1:]."""
    if len(dims) < 2:
        raise ValueError("dims needs an input width and at least one layer")
    weights = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(_glorot(rng, 2 * d_in, d_out, (2 * d_in, d_out), dtype))
    head_w = _glorot(rng, dims[-1], 2, (dims[-1], 2), dtype)
    head_b = np.zeros(2, dtype=dtype)
    attn = None
    if aggregator == "attention":
        attn = []
        for d_in in dims[:-1]:
            w1 = _glorot(rng, 2 * d_in, attention_hidden, (2 * d_in, attention_hidden), dtype)
            w2 = _glorot(rng, attention_hidden, 1, (attention_hidden, 1), dtype)
            attn.append((w1, w2))
    return GcnModel(aggregator=aggregator, layer_weights=weights, head_weight=head_w,
                    head_bias=head_b, attention_mlp=attn,
                    mean_row_normalized=mean_row_normalized)


# ---------------------------------------------------------------------------
# aggregation matrices

def aggregate_mean(A: np.ndarray, row_normalized: bool = False) -> np.ndarray:
    """Degree-normalized mixing matrix; isolated nodes get all-zero rows."""
    A = np.asarray(A)
    deg = A.sum(axis=1)
    if row_normalized:
        inv = np.divide(1.0, deg, out=np.zeros_like(deg, dtype=A.dtype), where=deg > 0)
        return inv[:, None] * A
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg, dtype=A.dtype),
                         where=deg > 0)
    return inv_sqrt[:, None] * A * inv_sqrt[None, :]


def _masked_row_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row softmax over the masked positions only; empty rows stay zero."""
    neg = np.where(mask, scores, -np.inf)
    rows = mask.any(axis=1)
    out = np.zeros_like(scores)
    if not rows.any():
        return out
    m = np.max(neg[rows], axis=1, keepdims=True)
    e = np.exp(neg[rows] - m)
    e[~mask[rows]] = 0.0
    out[rows] = e / e.sum(axis=1, keepdims=True)
    return out


def _weighted_forward(A: np.ndarray, X: np.ndarray):
    mask = A > 0
    r = np.linalg.norm(X, axis=1)
    safe = np.where(r > 0, r, 1.0)
    U = X / safe[:, None]          # zero rows stay zero -> similarity 0
    S = U @ U.T
    G = _masked_row_softmax(S, mask)
    return G, (mask, U, r, S, G)


def aggregate_weighted(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Cosine-similarity softmax over each node's neighbors."""
    return _weighted_forward(A, np.asarray(X))[0]


def _weighted_backward(dG: np.ndarray, cache):
    mask, U, r, S, G = cache
    dS = G * (dG - np.sum(dG * G, axis=1, keepdims=True))
    dS[~mask] = 0.0
    B = dS + dS.T
    q = np.sum(B * S, axis=1)
    dX = B @ U - q[:, None] * U
    nz = r > 0
    dX[nz] /= r[nz, None]
    dX[~nz] = 0.0
    return dX


def _edge_list(A: np.ndarray):
    ei, ej = np.nonzero(A)          # row-major: ei sorted ascending
    counts = np.bincount(ei, minlength=A.shape[0])
    nz = counts > 0
    starts = np.concatenate([[0], np.cumsum(counts)])[:-1][nz]
    return ei, ej, counts, nz, starts


def _segment_softmax(vals, counts, nz, starts):
    reps = counts[nz]
    m = np.repeat(np.maximum.reduceat(vals, starts), reps)
    e = np.exp(vals - m)
    z = np.repeat(np.add.reduceat(e, starts), reps)
    return e / z


def _attention_forward(A, X, w1, w2, edges=None):
    ei, ej, counts, nz, starts = _edge_list(A) if edges is None else edges
    n = A.shape[0]
    G = np.zeros_like(A, dtype=X.dtype)
    if ei.size == 0:
        return G, (ei, ej, counts, nz, starts, None, None, None, None)
    C = np.concatenate([X[ei], X[ej]], axis=1)
    Hpre = C @ w1
    H = np.maximum(Hpre, 0)
    scores = (H @ w2).ravel()
    w = _segment_softmax(scores, counts, nz, starts)
    G[ei, ej] = w
    return G, (ei, ej, counts, nz, starts, C, Hpre, H, w)


def aggregate_attention(A: np.ndarray, X: np.ndarray, w1: np.ndarray,
                        w2: np.ndarray) -> np.ndarray:
    """Learned softmax weights: a 2-layer MLP scores each edge's endpoint pair."""
    return _attention_forward(np.asarray(A), np.asarray(X), w1, w2)[0]


def _attention_backward(dG, cache, X, w1, w2):
    ei, ej, counts, nz, starts, C, Hpre, H, w = cache
    dX = np.zeros_like(X)
    if ei.size == 0:
        return dX, np.zeros_like(w1), np.zeros_like(w2)
    dw = dG[ei, ej]
    inner = np.repeat(np.add.reduceat(dw * w, starts), counts[nz])
    dscores = w * (dw - inner)
    dH = dscores[:, None] * w2.ravel()[None, :]
    dH[Hpre <= 0] = 0.0
    dw2 = (H.T @ dscores)[:, None]
    dw1 = C.T @ dH
    dC = dH @ w1.T
    d = X.shape[1]
    np.add.at(dX, ei, dC[:, :d])
    np.add.at(dX, ej, dC[:, d:])
    return dX, dw1, dw2


# ---------------------------------------------------------------------------
# forward / backward

def gconv_forward(X: np.ndarray, G: np.ndarray, W: np.ndarray) -> np.ndarray:
    """One layer: relu([X | G X] W)."""
    X = np.asarray(X)
    if W.shape[0] != 2 * X.shape[1]:
        raise ValueError(f"weight rows {W.shape[0]} != 2*d_in {2 * X.shape[1]}")
    return np.maximum(np.concatenate([X, G @ X], axis=1) @ W, 0)


def _forward_full(model: GcnModel, X0: np.ndarray, A: np.ndarray):
    X = np.ascontiguousarray(X0, dtype=model.dtype)
    A = np.ascontiguousarray(A, dtype=model.dtype)
    caches = []
    g_mean = aggregate_mean(A, model.mean_row_normalized) if model.aggregator == "mean" else None
    edges = _edge_list(A) if model.aggregator == "attention" else None
    for l, W in enumerate(model.layer_weights):
        if model.aggregator == "mean":
            G, agg_cache = g_mean, None
        elif model.aggregator == "weighted":
            G, agg_cache = _weighted_forward(A, X)
        else:
            w1, w2 = model.attention_mlp[l]
            G, agg_cache = _attention_forward(A, X, w1, w2, edges)
        C = np.concatenate([X, G @ X], axis=1)
        Z = C @ W
        Y = np.maximum(Z, 0)
        caches.append((X, G, C, Z, agg_cache))
        X = Y
    logits = X @ model.head_weight + model.head_bias
    return logits, X, caches


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(model: GcnModel, ips: InstancePivotSubgraph):
    """Linkage likelihood for every 1-hop node of the subgraph.

    Node order is hop-major, so predictions are the first hop1_count rows.
    Returns (likelihoods, per-layer activations).
    """
    logits, last, caches = _forward_full(model, ips.features, ips.adjacency)
    probs = _softmax(logits)[:, 1]
    return probs[: ips.hop1_count], [c[3] for c in caches] + [last]


def loss_and_grads_arrays(model: GcnModel, X0, A, labels, loss_mask):
    """Mean cross-entropy over masked nodes plus gradients for every parameter.

    Gradient arrays come back in the order of model.parameters().
    """
    labels = np.asarray(labels, dtype=np.int64)
    loss_mask = np.asarray(loss_mask, dtype=bool)
    n_loss = int(loss_mask.sum())
    if n_loss == 0:
        raise ValueError("no nodes carry loss (empty 1-hop set)")
    logits, last, caches = _forward_full(model, X0, A)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -float(np.mean(logp[loss_mask, labels[loss_mask]]))

    probs = np.exp(logp)
    dlogits = probs.copy()
    dlogits[np.arange(len(labels)), np.clip(labels, 0, 1)] -= 1.0
    dlogits[~loss_mask] = 0.0
    dlogits /= n_loss

    d_head_w = last.T @ dlogits
    d_head_b = dlogits.sum(axis=0)
    dX = dlogits @ model.head_weight.T

    d_layers = [None] * len(model.layer_weights)
    d_attn = ([None] * len(model.layer_weights)) if model.attention_mlp is not None else None
    for l in range(len(model.layer_weights) - 1, -1, -1):
        X, G, C, Z, agg_cache = caches[l]
        dZ = dX * (Z > 0)
        d_layers[l] = C.T @ dZ
        dC = dZ @ model.layer_weights[l].T
        d = X.shape[1]
        dM = dC[:, d:]
        dX = dC[:, :d] + G.T @ dM
        if model.aggregator == "weighted":
            dG = dM @ X.T
            dX += _weighted_backward(dG, agg_cache)
        elif model.aggregator == "attention":
            dG = dM @ X.T
            w1, w2 = model.attention_mlp[l]
            dx_extra, dw1, dw2 = _attention_backward(dG, agg_cache, X, w1, w2)
            dX += dx_extra
            d_attn[l] = (dw1, dw2)

    grads = d_layers + [d_head_w, d_head_b]
    if d_attn is not None:
        for dw1, dw2 in d_attn:
            grads += [dw1, dw2]
    return loss, grads


def loss_and_grads(model: GcnModel, ips: InstancePivotSubgraph, hop1_labels):
    """Loss/gradients for a single subgraph; labels cover the 1-hop nodes."""
    n1 = ips.hop1_count
    hop1_labels = np.asarray(hop1_labels, dtype=np.int64)
    if hop1_labels.shape != (n1,):
        raise ValueError(f"expected {n1} labels for 1-hop nodes, got {hop1_labels.shape}")
    labels = np.zeros(ips.size, dtype=np.int64)
    labels[:n1] = hop1_labels
    mask = np.zeros(ips.size, dtype=bool)
    mask[:n1] = True
    return loss_and_grads_arrays(model, ips.features, ips.adjacency, labels, mask)


# ---------------------------------------------------------------------------
# checkpoint IO

def save_model(model: GcnModel, path) -> None:
    tensors = model.parameters()
    with open(path, "wb") as fh:
        fh.write(GCNM_MAGIC)
        fh.write(struct.pack("<IBBI", GCNM_VERSION, _AGG_TAG[model.aggregator],
                             1 if model.mean_row_normalized else 0, len(model.layer_weights)))
        fh.write(struct.pack("<I", len(tensors)))
        for t in tensors:
            fh.write(struct.pack("<I", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}Q", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_model(path) -> GcnModel:
    with open(path, "rb") as fh:
        if fh.read(4) != GCNM_MAGIC:
            raise FormatError(f"{path}: bad magic")
        version, agg_tag, row_norm, n_layers = struct.unpack("<IBBI", fh.read(10))
        if version != GCNM_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        (n_tensors,) = struct.unpack("<I", fh.read(4))
        tensors = []
        for _ in range(n_tensors):
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{rank}Q", fh.read(8 * rank))
            count = int(np.prod(shape)) if rank else 1
            data = np.frombuffer(fh.read(count * 4), dtype="<f4")
            if data.size != count:
                raise FormatError(f"{path}: truncated tensor payload")
            tensors.append(data.reshape(shape).copy())
    aggregator = AGGREGATORS[agg_tag]
    layers = tensors[:n_layers]
    head_w, head_b = tensors[n_layers], tensors[n_layers + 1]
    attn = None
    if aggregator == "attention":
        rest = tensors[n_layers + 2:]
        attn = [(rest[2 * i], rest[2 * i + 1]) for i in range(n_layers)]
    return GcnModel(aggregator=aggregator, layer_weights=layers, head_weight=head_w,
                    head_bias=head_b, attention_mlp=attn,
                    mean_row_normalized=bool(row_norm))
