"""Leaf-wise regression tree growth on pre-binned features.

Split search uses gradient/count histograms per leaf (numba kernels). The child with fewer
rows is histogrammed directly and its sibling is obtained by subtracting from
the parent, so each split costs time proportional to the smaller child.
Hessians are taken as 1, which turns the second-order gain into

    G_L^2 / (n_L + l2) + G_R^2 / (n_R + l2) - G^2 / (n + l2).

Leaf outputs are not the Newton step -G / (n + l2): for the L1 objective each
leaf is renewed with the median residual of its rows, scaled by the learning
rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MIN_GAIN = 1e-10


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf. Node 0 is the root."""

    feature: np.ndarray
    threshold_bin: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    count: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    def apply(self, Xb: np.ndarray) -> np.ndarray:
        """Leaf node id reached by every row of a binned matrix."""
        return _route(self.feature, self.threshold_bin, self.left, self.right, np.ascontiguousarray(Xb))

    def predict_binned(self, Xb: np.ndarray) -> np.ndarray:
        return self.value[self.apply(Xb)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold_bin": self.threshold_bin.tolist(),
            # Leaves carry no threshold; null keeps the file strict JSON.
            "threshold": [None if np.isnan(t) else float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "count": self.count.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold_bin=np.asarray(d["threshold_bin"], dtype=np.int64),
            threshold=np.array([np.nan if t is None else t for t in d["threshold"]], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
            gain=np.asarray(d["gain"], dtype=float),
            count=np.asarray(d["count"], dtype=np.int64),
        )


class _Leaf:
    __slots__ = ("node", "idx", "G", "N", "g_sum", "n", "gain", "f", "k")


@njit(cache=True)
def _histograms(Xs, g, idx, nb):
    n_feat = Xs.shape[1]
    G = np.zeros((n_feat, nb))
    N = np.zeros((n_feat, nb))
    for i in idx:
        gi = g[i]
        for j in range(n_feat):
            b = Xs[i, j]
            G[j, b] += gi
            N[j, b] += 1.0
    return G, N


@njit(cache=True)
def _scan_splits(G, N, g_sum, n, l2, min_leaf):
    """Best (gain, feature position, bin); strict '>' keeps the lowest feature, then bin."""
    parent = g_sum * g_sum / (n + l2)
    best_gain = -np.inf
    best_f = -1
    best_k = -1
    n_feat, nb = G.shape
    for j in range(n_feat):
        gl = 0.0
        nl = 0.0
        for k in range(nb - 1):
            gl += G[j, k]
            nl += N[j, k]
            nr = n - nl
            if nl < min_leaf:
                continue
            if nr < min_leaf:
                break
            gr = g_sum - gl
            gain = gl * gl / (nl + l2) + gr * gr / (nr + l2) - parent
            if gain > best_gain:
                best_gain = gain
                best_f = j
                best_k = k
    return best_gain, best_f, best_k


@njit(cache=True)
def _route(feature, threshold_bin, left, right, Xb):
    out = np.empty(Xb.shape[0], dtype=np.int64)
    for i in range(Xb.shape[0]):
        node = 0
        while feature[node] >= 0:
            if Xb[i, feature[node]] <= threshold_bin[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _best_split(leaf: _Leaf, l2: float, min_leaf: int) -> None:
    leaf.gain, leaf.f, leaf.k = _scan_splits(leaf.G, leaf.N, leaf.g_sum, leaf.n, float(l2), float(min_leaf))


def grow_tree(
    Xb: np.ndarray,
    gradients: np.ndarray,
    residuals: np.ndarray,
    num_leaves: int = 63,
    l2_leaf_penalty: float = 1.0,
    min_samples_per_leaf: int = 20,
    learning_rate: float = 1.0,
    rows: np.ndarray | None = None,
    features: np.ndarray | None = None,
    edges: list[np.ndarray] | None = None,
) -> Tree:
    """Grow one tree leaf-wise on the given rows and candidate features.

    ``gradients`` are the per-row first derivatives (sign of prediction minus
    target for L1); ``residuals`` are target minus prediction and are only used
    for the median leaf renewal. Growth stops at ``num_leaves`` or when no leaf
    has a split with positive gain.
    """
    if rows is None:
        rows = np.arange(Xb.shape[0])
    if features is None:
        features = np.arange(Xb.shape[1])
    features = np.asarray(features, dtype=np.int64)
    Xs = Xb[np.ix_(rows, features)] if features.size else np.empty((rows.size, 0), dtype=np.uint8)
    g = np.asarray(gradients, dtype=float)[rows]
    r = np.asarray(residuals, dtype=float)[rows]
    n_feat = features.size
    nb = int(Xs.max()) + 1 if Xs.size else 1

    def histograms(idx):
        return _histograms(Xs, g, idx, nb)

    def make_leaf(node, idx, G=None, N=None):
        leaf = _Leaf()
        leaf.node, leaf.idx = node, idx
        if G is None:
            G, N = histograms(idx)
        leaf.G, leaf.N = G, N
        leaf.g_sum = float(g[idx].sum())
        leaf.n = float(idx.size)
        _best_split(leaf, l2_leaf_penalty, min_samples_per_leaf)
        return leaf

    feature = [-1]
    thr_bin = [-1]
    left = [-1]
    right = [-1]
    gains = [0.0]
    counts = [int(rows.size)]

    root = np.arange(rows.size)
    leaves = [make_leaf(0, root) if n_feat else _stub(root)]

    while len(leaves) < num_leaves:
        best = max(range(len(leaves)), key=lambda i: (leaves[i].gain, -leaves[i].node))
        parent = leaves[best]
        if not parent.gain > MIN_GAIN:
            break
        leaves.pop(best)
        go_left = Xs[parent.idx, parent.f] <= parent.k
        li, ri = parent.idx[go_left], parent.idx[~go_left]
        lnode, rnode = len(feature), len(feature) + 1
        feature[parent.node] = int(features[parent.f])
        thr_bin[parent.node] = int(parent.k)
        left[parent.node], right[parent.node] = lnode, rnode
        gains[parent.node] = parent.gain
        for _ in range(2):
            feature.append(-1)
            thr_bin.append(-1)
            left.append(-1)
            right.append(-1)
            gains.append(0.0)
        counts.extend([int(li.size), int(ri.size)])
        if li.size <= ri.size:
            small = make_leaf(lnode, li)
            big = make_leaf(rnode, ri, parent.G - small.G, parent.N - small.N)
            leaves.extend([small, big])
        else:
            small = make_leaf(rnode, ri)
            big = make_leaf(lnode, li, parent.G - small.G, parent.N - small.N)
            leaves.extend([big, small])

    value = np.zeros(len(feature))
    for leaf in leaves:
        if leaf.idx.size:
            value[leaf.node] = learning_rate * float(np.median(r[leaf.idx]))

    feature_arr = np.asarray(feature, dtype=np.int64)
    thr_arr = np.asarray(thr_bin, dtype=np.int64)
    threshold = np.full(feature_arr.size, np.nan)
    if edges is not None:
        for i in np.flatnonzero(feature_arr >= 0):
            threshold[i] = edges[feature_arr[i]][thr_arr[i]]
    return Tree(
        feature=feature_arr,
        threshold_bin=thr_arr,
        threshold=threshold,
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=value,
        gain=np.asarray(gains, dtype=float),
        count=np.asarray(counts, dtype=np.int64),
    )


def _stub(idx: np.ndarray) -> _Leaf:
    leaf = _Leaf()
    leaf.node, leaf.idx, leaf.gain = 0, idx, -np.inf
    return leaf
