"""Comparison models: k-nearest neighbors, a CART tree and label propagation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist


# -- k-nearest neighbors ---------------------------------------------------

TIE_POLICIES = ("vote", "index")


def neighbor_votes(train_x, train_y, x, k=3, n_classes=None, ties="vote"):
    """Class vote counts from the k nearest training points (Euclidean).

    ``ties="index"`` breaks distance ties by the lower training index.
    ``ties="vote"`` lets every point tied at the k-th distance take an
    equal share of the remaining votes, which makes the result independent
    of row order on data with duplicated feature vectors. The two agree
    whenever the k-th distance is unique.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    train_y = np.asarray(train_y, dtype=np.int64)
    if ties not in TIE_POLICIES:
        raise ValueError(f"ties must be one of {TIE_POLICIES}")
    if k < 1:
        raise ValueError("k must be >= 1")
    m = train_x.shape[0]
    if k > m:
        raise ValueError(f"k={k} exceeds the {m} training points")
    c = int(n_classes or train_y.max() + 1)
    dist = cdist(np.atleast_2d(np.asarray(x, dtype=float)), train_x, "sqeuclidean")
    onehot = np.zeros((m, c))
    onehot[np.arange(m), train_y] = 1.0
    if ties == "index":
        nb = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return onehot[nb].sum(axis=1)
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1 : k]
    closer = dist < kth
    tied = dist == kth
    share = (k - closer.sum(axis=1)) / tied.sum(axis=1)
    return closer @ onehot + share[:, None] * (tied @ onehot)


def knn_votes(train_x, train_y, x, k=3, n_classes=None, ties="vote"):
    return neighbor_votes(train_x, train_y, x, k, n_classes, ties)


def knn_predict_many(train_x, train_y, x, k=3, n_classes=None, ties="vote"):
    """Majority vote of the k nearest points; vote ties go to the lowest class."""
    return np.argmax(knn_votes(train_x, train_y, x, k, n_classes, ties), axis=1)


def knn_predict(train_x, train_y, x, k=3, ties="vote") -> int:
    return int(knn_predict_many(train_x, train_y, np.asarray(x, dtype=float)[None, :], k, ties=ties)[0])


# -- decision tree ---------------------------------------------------------

@dataclass
class _Node:
    counts: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: "_Node" = None
    right: "_Node" = None

    @property
    def leaf(self):
        return self.left is None


def _gini(counts):
    n = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / n[..., None]
    return 1.0 - np.nansum(p * p, axis=-1)


def _best_split(x, y, c):
    """Highest Gini gain over midpoints of distinct sorted values.

    Returns ``(feature, threshold)`` or ``None`` if every row is identical.
    Gain ties keep the first feature and the lowest threshold.
    """
    n = y.size
    parent = _gini(np.bincount(y, minlength=c).astype(float))
    best = None
    best_gain = -np.inf
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs, ys = x[order, j], y[order]
        onehot = np.zeros((n, c))
        onehot[np.arange(n), ys] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        right = left[-1] + onehot[-1] - left
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        nl = (cut + 1).astype(float)
        gain = parent - (nl * _gini(left[cut]) + (n - nl) * _gini(right[cut])) / n
        i = int(np.argmax(gain))
        if gain[i] > best_gain + 1e-12:
            best_gain = gain[i]
            lo, hi = xs[cut[i]], xs[cut[i] + 1]
            mid = 0.5 * (lo + hi)
            # adjacent floats can round the midpoint up onto hi
            best = (j, mid if mid < hi else lo)
    return best


class DecisionTree:
    """Fully grown binary CART tree with Gini impurity.

    A node becomes a leaf when it is pure, holds fewer than
    ``min_samples_split`` rows, or cannot be split because all of its rows
    are identical. Zero-gain splits are still taken on impure nodes, so a
    consistent training set is always fit exactly.
    """

    def __init__(self, min_samples_split=2):
        self.min_samples_split = min_samples_split
        self.root = None
        self.n_classes = 0

    def fit(self, x, y, n_classes=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=np.int64)
        if y.size == 0:
            raise ValueError("cannot fit a tree on an empty training set")
        self.n_classes = int(n_classes or y.max() + 1)
        self.root = self._grow(x, y)
        return self

    def _grow(self, x, y):
        node = _Node(np.bincount(y, minlength=self.n_classes))
        if np.count_nonzero(node.counts) <= 1 or y.size < self.min_samples_split:
            return node
        split = _best_split(x, y, self.n_classes)
        if split is None:
            return node
        node.feature, node.threshold = split
        go_left = x[:, node.feature] <= node.threshold
        node.left = self._grow(x[go_left], y[go_left])
        node.right = self._grow(x[~go_left], y[~go_left])
        return node

    def _leaves(self, x):
        out = []
        for row in np.atleast_2d(x):
            node = self.root
            while not node.leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out.append(node.counts)
        return np.array(out, dtype=float)

    def predict(self, x):
        return np.argmax(self._leaves(np.asarray(x, dtype=float)), axis=1)

    def predict_proba(self, x):
        counts = self._leaves(np.asarray(x, dtype=float))
        return counts / counts.sum(axis=1, keepdims=True)

    def depth(self, node=None):
        node = node or self.root
        return 0 if node.leaf else 1 + max(self.depth(node.left), self.depth(node.right))


def dtree_fit_predict(train_x, train_y, queries, n_classes=None):
    return DecisionTree().fit(train_x, train_y, n_classes).predict(queries)


# -- label propagation -----------------------------------------------------

SIGMA_HEURISTICS = ("knn", "median")


@dataclass(frozen=True)
class LabelPropConfig:
    sigma: float | None = None  # None: derive from sigma_heuristic
    sigma_heuristic: str = "knn"
    sigma_neighbors: int = 7
    clamp: bool = True
    max_sweeps: int = 1000
    convergence_tolerance: float = 1e-6

    def __post_init__(self):
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.sigma_heuristic not in SIGMA_HEURISTICS:
            raise ValueError(f"sigma_heuristic must be one of {SIGMA_HEURISTICS}")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass(frozen=True, eq=False)
class LabelPropResult:
    labels: np.ndarray          # for split.unlabeled_idx
    scores: np.ndarray          # n x C, rows sum to one
    converged: bool
    sweeps: int
    sigma: float
    max_changes: tuple = field(default=(), repr=False)

    def tail_non_increasing(self, window=5):
        tail = np.asarray(self.max_changes[-window:])
        return bool(np.all(np.diff(tail) <= 0))


def median_distance(x):
    """Median pairwise Euclidean distance, falling back to the mean of the
    positive distances when more than half of the pairs coincide."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] < 2:
        return 1.0
    dist = pdist(x)
    med = float(np.median(dist))
    if med > 0:
        return med
    pos = dist[dist > 0]
    return float(pos.mean()) if pos.size else 1.0


def neighbor_distance(x, k=7):
    """Median over points of the distance to the k-th nearest neighbor.

    Only neighbors at positive distance count, so duplicated rows do not
    drive the bandwidth to zero.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    uniq, counts = np.unique(x, axis=0, return_counts=True)
    if uniq.shape[0] < 2:
        return 1.0
    dist = cdist(uniq, uniq)
    kth = np.empty(uniq.shape[0])
    for i in range(uniq.shape[0]):
        order = np.argsort(dist[i], kind="stable")[1:]
        reach = np.cumsum(counts[order])
        j = min(int(np.searchsorted(reach, k)), order.size - 1)
        kth[i] = dist[i, order[j]]
    return float(np.median(np.repeat(kth, counts)))


def resolve_sigma(x, cfg):
    if cfg.sigma is not None:
        return float(cfg.sigma)
    if cfg.sigma_heuristic == "median":
        return median_distance(x)
    return neighbor_distance(x, cfg.sigma_neighbors)


def labelprop_transduce(split, cfg: LabelPropConfig = LabelPropConfig(), callback=None) -> LabelPropResult:
    """Iterative label propagation on a dense RBF graph.

    Rows of the affinity ``exp(-|xi - xj|^2 / sigma^2)`` are normalized to a
    transition matrix ``T``; the score matrix is updated as ``F <- T F`` and
    labeled rows are reset to their one-hot labels after every sweep. Nodes
    sharing a feature vector and a labeled/unlabeled state evolve
    identically, so they are merged before iterating.

    ``callback(sweep, scores)`` receives the full ``n x C`` score matrix
    after each sweep.
    """
    data = split.dataset
    c = data.class_count
    if split.l == 0:
        raise ValueError("label propagation needs labeled points")
    sigma = resolve_sigma(data.features, cfg)

    y = np.full(data.sample_count, -1, dtype=np.int64)
    y[split.labeled_idx] = split.labeled_labels()
    key = np.column_stack([data.features, y])
    groups, first, inverse, counts = np.unique(
        key, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    gx, gy = groups[:, :-1], y[first]
    w = np.exp(-cdist(gx, gx, "sqeuclidean") / sigma**2) * counts[None, :]
    t = w / w.sum(axis=1, keepdims=True)

    lab = gy >= 0
    clamped = np.zeros((lab.sum(), c))
    clamped[np.arange(lab.sum()), gy[lab]] = 1.0
    f = np.full((groups.shape[0], c), 1.0 / c)
    f[lab] = clamped

    changes = []
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        nxt = t @ f
        if cfg.clamp:
            nxt[lab] = clamped
        change = float(np.abs(nxt - f).max())
        f = nxt
        changes.append(change)
        if callback is not None:
            callback(sweeps, f[inverse])
        if change < cfg.convergence_tolerance:
            converged = True
            break

    scores = f[inverse]
    labels = np.argmax(scores[split.unlabeled_idx], axis=1) if split.u else np.zeros(0, dtype=np.int64)
    return LabelPropResult(
        labels=labels, scores=scores, converged=converged, sweeps=sweeps,
        sigma=float(sigma), max_changes=tuple(changes),
    )
