"""Cluster-and-label classification with a local-best particle swarm.

Each neighborhood of the swarm owns one cluster centroid and is bound to a
class. A particle encodes a single centroid; it is scored by dropping it
into the current best centroids of the other neighborhoods, assigning every
point (labeled and unlabeled) to its nearest centroid, and taking the mean
silhouette of that partition. Partitions whose labeled members contradict
the neighborhood classes are rejected and the offending particle is
scattered to a random state.

After the swarm settles, each cluster takes the majority class of its
labeled members. Unlabeled points in clusters whose labeled members are
mixed (or absent) fall back to their nearest labeled point.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .baselines import neighbor_votes
from .dataset import SemiSupervisedSplit
from .metrics import SilhouetteEvaluator
from .swarm import (
    WORST,
    Neighborhood,
    PsoConfig,
    StallMonitor,
    particle_stream,
    random_particle,
    reset_particle,
    step,
)

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """The swarm never found an admissible clustering."""


@dataclass(frozen=True, eq=False)
class ClusterLabelModel:
    centroids: np.ndarray
    cluster_class: np.ndarray
    cluster_pure: np.ndarray
    anchor_features: np.ndarray
    anchor_labels: np.ndarray
    fitness_achieved: float
    n_classes: int
    bound_classes: np.ndarray = None
    ties: str = "vote"
    history: tuple = field(default=(), repr=False)

    @property
    def n_clusters(self):
        return self.centroids.shape[0]


def nearest_centroid(points, centroids):
    """Index of the closest centroid per row; ties go to the lower index."""
    return np.argmin(cdist(np.atleast_2d(points), np.atleast_2d(centroids), "sqeuclidean"), axis=1)


def _class_counts(assignment, split, n_clusters):
    c = split.dataset.class_count
    cl = np.asarray(assignment)[split.labeled_idx]
    y = split.labeled_labels()
    return np.bincount(cl * c + y, minlength=n_clusters * c).reshape(n_clusters, c)


def _agrees(counts, bound_classes):
    has = counts.sum(axis=1) > 0
    top = counts.max(axis=1)
    own = counts[np.arange(counts.shape[0]), bound_classes]
    return bool(np.all(~has | (own == top)))


def check_agreement(assignment, split: SemiSupervisedSplit, bound_classes) -> bool:
    """True iff each cluster's labeled majority is its bound class.

    A tie that includes the bound class counts as agreement; clusters
    without labeled members are ignored.
    """
    bound = np.asarray(bound_classes, dtype=np.int64)
    return _agrees(_class_counts(assignment, split, bound.size), bound)


def label_clusters(assignment, split: SemiSupervisedSplit, bound_classes):
    """Return ``(cluster_class, cluster_pure)`` from the labeled members."""
    bound = np.asarray(bound_classes, dtype=np.int64)
    counts = _class_counts(assignment, split, bound.size)
    cls = bound.copy()
    pure = np.zeros(bound.size, dtype=bool)
    for k, row in enumerate(counts):
        if row.sum() == 0:
            continue
        winners = np.flatnonzero(row == row.max())
        cls[k] = bound[k] if bound[k] in winners else winners[0]
        pure[k] = np.count_nonzero(row) == 1
    return cls, pure


class _Objective:
    """Agreement-gated silhouette over one split, with cached distances."""

    def __init__(self, split: SemiSupervisedSplit, bound_classes):
        self.split = split
        self.bound = np.asarray(bound_classes, dtype=np.int64)
        self.k = self.bound.size
        self.sil = SilhouetteEvaluator(split.dataset.features)
        c = split.dataset.class_count
        self.c = c
        lab_unique = self.sil.inverse[split.labeled_idx]
        self.lab_unique = lab_unique
        self.lab_y = split.labeled_labels()

    def __call__(self, centroids):
        """Return ``(fitness, agrees)``."""
        ua = nearest_centroid(self.sil.unique, centroids)
        cl = ua[self.lab_unique]
        counts = np.bincount(cl * self.c + self.lab_y, minlength=self.k * self.c).reshape(self.k, self.c)
        if not _agrees(counts, self.bound):
            return WORST, False
        if np.unique(ua).size < 2:
            return WORST, True
        return self.sil.mean(ua), True


def evaluate_candidate_fitness(centroids, split: SemiSupervisedSplit, bound_classes) -> float:
    """Mean silhouette of the nearest-centroid partition, or -inf if the
    partition contradicts the labels or has fewer than two clusters."""
    return _Objective(split, bound_classes)(np.atleast_2d(np.asarray(centroids, dtype=float)))[0]


def _seed_position(split, cls, first, rng):
    x = split.labeled_features()[split.labeled_labels() == cls]
    if first:
        return x.mean(axis=0)
    return x[rng.integers(len(x))]


def fit(split: SemiSupervisedSplit, cfg: PsoConfig = PsoConfig(), n_clusters=None, ties="vote") -> ClusterLabelModel:
    """Fit the label-guided local-best swarm and label its clusters.

    Parameters
    ----------
    split : SemiSupervisedSplit
        Normalized data with its labeled/unlabeled partition.
    cfg : PsoConfig
    n_clusters : int, optional
        Number of neighborhoods/clusters, at least the class count.
        Neighborhood ``k`` is bound to class ``k mod C``.
    ties : {"vote", "index"}
        How the nearest-labeled-point fallback resolves equidistant anchors;
        see :func:`sswarm.baselines.neighbor_votes`.
    """
    data = split.dataset
    c, d = data.class_count, data.feature_count
    k_total = c if n_clusters is None else int(n_clusters)
    if k_total < c:
        raise ValueError(f"need at least one cluster per class ({c}), got {k_total}")
    bound = np.arange(k_total) % c
    objective = _Objective(split, bound)

    swarm = []
    for k in range(k_total):
        members = []
        for i in range(cfg.particles_per_neighborhood):
            rng = particle_stream(cfg.seed, k, i)
            seed = _seed_position(split, bound[k], k < c, rng) if i == 0 else None
            members.append(random_particle(d, cfg, rng, seed))
        swarm.append(Neighborhood(members, members[0].position.copy(), WORST, int(bound[k])))

    context = np.array([nb.lbest_position for nb in swarm])
    best, _ = objective(context)
    for nb in swarm:
        nb.lbest_fitness = best
    history = [best]
    monitor = StallMonitor(cfg.stall_window, cfg.stall_tolerance)

    for it in range(cfg.max_iterations):
        frozen = context.copy()
        proposals = []
        moved = []
        for k, nb in enumerate(swarm):
            top_f, top_x = WORST, None
            for p in nb.particles:
                trial = frozen.copy()
                trial[k] = p.position
                f, ok = objective(trial)
                if not ok:
                    reset_particle(p, cfg)
                    continue
                p.offer(f)
                if f > top_f:
                    top_f, top_x = f, p.position.copy()
                moved.append((k, p))
            proposals.append((top_f, top_x))

        # synchronization point: accept neighborhood bests one at a time so
        # the assembled fitness can only go up
        for k, (top_f, top_x) in enumerate(proposals):
            if top_x is None or top_f <= best:
                continue
            trial = context.copy()
            trial[k] = top_x
            f, ok = objective(trial)
            if ok and f > best:
                context, best = trial, f
                swarm[k].lbest_position = top_x
                swarm[k].lbest_fitness = f

        for k, p in moved:
            step(p, context[k], cfg)

        history.append(best)
        if monitor.update(best):
            log.debug("stalled after %d iterations at %.6f", it + 1, best)
            break

    if not np.isfinite(best):
        raise FitError("no clustering consistent with the labeled data was found")

    assignment = nearest_centroid(data.features, context)
    cls, pure = label_clusters(assignment, split, bound)
    fitness = objective(context)[0]
    return ClusterLabelModel(
        centroids=context,
        cluster_class=cls,
        cluster_pure=pure,
        anchor_features=split.labeled_features().copy(),
        anchor_labels=split.labeled_labels().copy(),
        fitness_achieved=fitness,
        n_classes=c,
        bound_classes=bound,
        ties=ties,
        history=tuple(history),
    )


def _nearest_anchor(model, x):
    votes = neighbor_votes(model.anchor_features, model.anchor_labels, x, 1, model.n_classes, model.ties)
    return np.argmax(votes, axis=1)


def predict_many(model: ClusterLabelModel, x):
    """Labels and per-class scores for rows of ``x`` (already normalized)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.centroids.shape[1]:
        raise ValueError(f"expected {model.centroids.shape[1]} features, got {x.shape[1]}")
    dist = cdist(x, model.centroids)
    cluster = np.argmin(dist, axis=1)
    labels = model.cluster_class[cluster].copy()
    impure = ~model.cluster_pure[cluster]
    if impure.any():
        labels[impure] = _nearest_anchor(model, x[impure])
    logits = -dist - (-dist).max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    scores = np.zeros((x.shape[0], model.n_classes))
    for k, cls in enumerate(model.cluster_class):
        scores[:, cls] += w[:, k]
    return labels, scores


def predict(model: ClusterLabelModel, x):
    """Class of one normalized feature vector and its per-class score vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    labels, scores = predict_many(model, x[None, :])
    return int(labels[0]), scores[0]


def resolve_impure(model: ClusterLabelModel, split: SemiSupervisedSplit):
    """Labels for ``split.unlabeled_idx`` (pure cluster class, else nearest anchor)."""
    if model.anchor_labels.size == 0:
        raise ValueError("model has no labeled anchors")
    x = split.dataset.features[split.unlabeled_idx]
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return predict_many(model, x)[0]


def transduce(model: ClusterLabelModel, split: SemiSupervisedSplit):
    """Full-length label vector: given labels kept, unlabeled points resolved."""
    out = np.empty(split.dataset.sample_count, dtype=np.int64)
    out[split.labeled_idx] = split.labeled_labels()
    out[split.unlabeled_idx] = resolve_impure(model, split)
    return out
