"""Cluster validity and classification metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class SilhouetteUndefined(ValueError):
    """Fewer than two non-empty clusters."""


@dataclass(frozen=True, eq=False)
class SilhouetteBreakdown:
    a: np.ndarray
    b: np.ndarray
    s: np.ndarray
    mean_s: float

    @property
    def per_point(self):
        return [{"a": float(a), "b": float(b), "s": float(s)} for a, b, s in zip(self.a, self.b, self.s)]


class SilhouetteEvaluator:
    """Silhouette for many assignments of one fixed point set.

    Pairwise distances are computed once over the distinct rows only; a
    duplicated row contributes through its multiplicity. Every assignment
    passed in must give identical rows the same cluster, which holds for
    nearest-centroid assignment.
    """

    def __init__(self, features, metric="euclidean"):
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        self.unique, self.first, self.inverse, self.counts = np.unique(
            x, axis=0, return_index=True, return_inverse=True, return_counts=True
        )
        self.inverse = self.inverse.reshape(-1)
        self.n = x.shape[0]
        self.dist = cdist(self.unique, self.unique, metric=metric)

    def unique_assignment(self, assignment):
        assignment = np.asarray(assignment, dtype=np.int64)
        ua = assignment[self.first]
        if not np.array_equal(ua[self.inverse], assignment):
            raise ValueError("identical rows must share a cluster")
        return ua

    def breakdown_unique(self, ua, n_clusters=None):
        """Silhouette terms per distinct row, given the per-distinct-row assignment."""
        k = int(ua.max()) + 1 if n_clusters is None else n_clusters
        weight = np.zeros((ua.size, k))
        weight[np.arange(ua.size), ua] = self.counts
        size = weight.sum(axis=0)
        if np.count_nonzero(size) < 2:
            raise SilhouetteUndefined("silhouette needs at least two non-empty clusters")
        total = self.dist @ weight
        own_size = size[ua]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(own_size > 1, total[np.arange(ua.size), ua] / (own_size - 1), 0.0)
            mean_other = total / size
        mean_other[:, size == 0] = np.inf
        mean_other[np.arange(ua.size), ua] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(denom > 0, (b - a) / denom, 0.0)
        s = np.where(own_size > 1, s, 0.0)
        return a, b, s

    def mean(self, ua, n_clusters=None):
        _, _, s = self.breakdown_unique(ua, n_clusters)
        return float(np.dot(self.counts, s) / self.n)

    def breakdown(self, assignment, n_clusters=None):
        ua = self.unique_assignment(assignment)
        a, b, s = self.breakdown_unique(ua, n_clusters)
        return SilhouetteBreakdown(
            a=a[self.inverse], b=b[self.inverse], s=s[self.inverse],
            mean_s=float(np.dot(self.counts, s) / self.n),
        )


def silhouette(features, assignment, metric="euclidean") -> SilhouetteBreakdown:
    """Per-point silhouette ``(b - a) / max(a, b)``.

    ``a`` is the mean distance to the other members of the point's own
    cluster and ``b`` the smallest mean distance to another non-empty
    cluster. Members of singleton clusters get ``s = 0``.

    Raises
    ------
    SilhouetteUndefined
        If fewer than two clusters are non-empty.
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if assignment.shape != (x.shape[0],):
        raise ValueError("assignment must have one entry per point")
    if assignment.size and assignment.min() < 0:
        raise ValueError("cluster indices must be non-negative")
    return SilhouetteEvaluator(x, metric).breakdown(assignment)


def confusion_matrix(truth, predicted, n_classes=None):
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if truth.shape != predicted.shape:
        raise ValueError("truth and predicted lengths differ")
    c = n_classes or int(max(truth.max(initial=0), predicted.max(initial=0))) + 1
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (truth, predicted), 1)
    return counts


def f1_per_class(truth, predicted, n_classes=None):
    cm = confusion_matrix(truth, predicted, n_classes)
    tp = np.diag(cm).astype(float)
    pred_pos = cm.sum(axis=0)
    true_pos = cm.sum(axis=1)
    precision = np.divide(tp, pred_pos, out=np.zeros_like(tp), where=pred_pos > 0)
    recall = np.divide(tp, true_pos, out=np.zeros_like(tp), where=true_pos > 0)
    both = precision + recall
    return np.divide(2 * precision * recall, both, out=np.zeros_like(tp), where=both > 0)


def f1_weighted(truth, predicted, n_classes=None) -> float:
    """Support-weighted mean of per-class F1 (0/0 counts as 0)."""
    truth = np.asarray(truth, dtype=np.int64)
    if truth.size == 0:
        raise ValueError("f1 needs at least one sample")
    f1 = f1_per_class(truth, predicted, n_classes)
    support = np.bincount(truth, minlength=f1.size)
    return float(np.dot(f1, support) / truth.size)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


def roc_auc(truth, scores) -> RocCurve:
    """Threshold sweep over distinct scores, highest first.

    The first point is ``(0, 0)`` at threshold ``+inf``; the lowest distinct
    score always yields ``(1, 1)``. Area by the trapezoidal rule, which
    counts tied positive/negative pairs as one half.
    """
    truth = np.asarray(truth).astype(bool)
    scores = np.asarray(scores, dtype=float)
    if truth.shape != scores.shape:
        raise ValueError("truth and scores lengths differ")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both positive and negative samples")
    thresholds = np.unique(scores)[::-1]
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truth[order]
    cum_tp = np.cumsum(sorted_truth)
    cum_fp = np.cumsum(~sorted_truth)
    # last position holding each distinct threshold
    last = np.searchsorted(-sorted_scores, -thresholds, side="right") - 1
    tpr = np.concatenate([[0.0], cum_tp[last] / n_pos])
    fpr = np.concatenate([[0.0], cum_fp[last] / n_neg])
    thr = np.concatenate([[np.inf], thresholds])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thr, auc=auc)
