"""Supervised particle swarm classifier with one centroid per class.

A particle is the concatenation of all class centroids (``C * d`` numbers);
a point is classified by its nearest class centroid. Three training
objectives are available, all minimized:

``psi1``  percentage of misclassified training points
``psi2``  mean distance from each training point to its class centroid
``psi3``  ``(psi1 / 100 + psi2) / 2``
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .swarm import PsoConfig, StallMonitor, particle_stream, random_particle, step

VARIANTS = ("psi1", "psi2", "psi3")


@dataclass(frozen=True, eq=False)
class PscModel:
    class_centroids: np.ndarray
    fitness_variant: str = "psi3"
    training_fitness: float = float("nan")
    iterations: int = 0

    @property
    def n_classes(self):
        return self.class_centroids.shape[0]


def _check(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown fitness variant {variant!r}; choose from {VARIANTS}")


def psc_fitness(variant, centroids, x, y, psi2_target="true"):
    """Training objective for a ``C x d`` centroid matrix (lower is better).

    ``psi2_target="nearest"`` measures each point against the centroid it is
    assigned to rather than the centroid of its true class.
    """
    _check(variant)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    m = y.size
    if m == 0:
        raise ValueError("psc fitness needs at least one training point")
    dist = cdist(x, np.atleast_2d(centroids))
    assigned = np.argmin(dist, axis=1)
    psi1 = 100.0 * np.count_nonzero(assigned != y) / m
    if variant == "psi1":
        return psi1
    target = y if psi2_target == "true" else assigned
    psi2 = float(dist[np.arange(m), target].sum() / m)
    if variant == "psi2":
        return psi2
    return 0.5 * (psi1 / 100.0 + psi2)


def psc_fit(x, y, cfg: PsoConfig = PsoConfig(), variant="psi3", n_classes=None, psi2_target="true") -> PscModel:
    """Global-best swarm search over flattened class-centroid vectors."""
    _check(variant)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    c = int(n_classes or y.max() + 1)
    missing = set(range(c)) - set(np.unique(y).tolist())
    if missing:
        raise ValueError(f"classes without training points: {sorted(missing)}")
    d = x.shape[1]

    def cost(flat):
        return psc_fitness(variant, flat.reshape(c, d), x, y, psi2_target)

    particles = [
        random_particle(c * d, cfg, particle_stream(cfg.seed, 0, i))
        for i in range(cfg.particles_per_neighborhood)
    ]
    g_pos, g_fit = particles[0].position.copy(), -np.inf
    monitor = StallMonitor(cfg.stall_window, cfg.stall_tolerance)
    for it in range(1, cfg.max_iterations + 1):
        for p in particles:
            f = -cost(p.position)
            p.offer(f)
            if f > g_fit:
                g_pos, g_fit = p.position.copy(), f
        for p in particles:
            step(p, g_pos, cfg)
        if g_fit == 0.0 or monitor.update(g_fit):
            break
    return PscModel(class_centroids=g_pos.reshape(c, d), fitness_variant=variant, training_fitness=-g_fit,
                    iterations=it)


def psc_predict_many(model: PscModel, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.class_centroids.shape[1]:
        raise ValueError(f"expected {model.class_centroids.shape[1]} features, got {x.shape[1]}")
    return np.argmin(cdist(x, model.class_centroids), axis=1)


def psc_predict(model: PscModel, x) -> int:
    """Nearest class centroid; ties go to the lower class index."""
    return int(psc_predict_many(model, np.asarray(x, dtype=float)[None, :])[0])


def psc_scores(model: PscModel, x):
    """Softmax of negative centroid distances, one column per class."""
    dist = cdist(np.atleast_2d(x), model.class_centroids)
    z = np.exp(-dist + dist.min(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)
