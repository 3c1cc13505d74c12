"""Particle state and the inertia-weight velocity/position updates.

Fitness is maximized throughout; ``WORST`` (-inf) marks a particle with no
usable personal best. Positions live in the unit box, velocities are
capped per dimension at ``v_max``, and a particle that hits a wall stops
along that axis (absorbing boundary).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WORST = -np.inf


@dataclass(frozen=True)
class PsoConfig:
    inertia: float = 0.72
    c1: float = 1.49
    c2: float = 1.49
    particles_per_neighborhood: int = 10
    max_iterations: int = 100
    stall_window: int = 20
    stall_tolerance: float = 1e-6
    v_max: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.inertia < 1.0:
            raise ValueError("inertia must lie in [0, 1)")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.particles_per_neighborhood < 2:
            raise ValueError("need at least 2 particles per neighborhood")
        if self.stall_window < 1:
            raise ValueError("stall_window must be >= 1")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray = None
    pbest_fitness: float = WORST
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.pbest_position is None:
            self.pbest_position = self.position.copy()

    def offer(self, fitness):
        """Record ``fitness`` of the current position; True if it became pbest."""
        if fitness > self.pbest_fitness:
            self.pbest_fitness = fitness
            self.pbest_position = self.position.copy()
            return True
        return False


@dataclass
class Neighborhood:
    particles: list
    lbest_position: np.ndarray
    lbest_fitness: float = WORST
    bound_class: int = 0


def particle_stream(seed, *path):
    """Independent generator for one particle, keyed by (seed, *path)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, *map(int, path)]))


def update_velocity(p: Particle, social_best, cfg: PsoConfig, rng=None, r1=None, r2=None):
    """Inertia-weight velocity step, clamped to ``[-v_max, v_max]``.

    ``r1``/``r2`` may be passed explicitly; otherwise they are drawn
    uniformly per dimension from ``rng`` (default: the particle's stream).
    """
    d = p.position.size
    if r1 is None or r2 is None:
        rng = rng if rng is not None else p.rng
        r1 = rng.random(d) if r1 is None else r1
        r2 = rng.random(d) if r2 is None else r2
    v = (
        cfg.inertia * p.velocity
        + cfg.c1 * r1 * (p.pbest_position - p.position)
        + cfg.c2 * r2 * (np.asarray(social_best) - p.position)
    )
    return np.clip(v, -cfg.v_max, cfg.v_max)


def update_position(p: Particle):
    """Return ``(position, velocity)`` after one move; walls zero the velocity."""
    x = p.position + p.velocity
    hit = (x < 0.0) | (x > 1.0)
    return np.clip(x, 0.0, 1.0), np.where(hit, 0.0, p.velocity)


def step(p: Particle, social_best, cfg: PsoConfig, rng=None):
    p.velocity = update_velocity(p, social_best, cfg, rng)
    p.position, p.velocity = update_position(p)


def reset_particle(p: Particle, cfg: PsoConfig, rng=None):
    """Scatter ``p`` to a fresh random state and forget its personal best."""
    rng = rng if rng is not None else p.rng
    d = p.position.size
    p.position = rng.random(d)
    p.velocity = rng.uniform(-cfg.v_max, cfg.v_max, d)
    p.pbest_position = p.position.copy()
    p.pbest_fitness = WORST
    return p


def random_particle(d, cfg: PsoConfig, rng, position=None):
    x = rng.random(d) if position is None else np.clip(np.asarray(position, dtype=float), 0.0, 1.0)
    v = rng.uniform(-cfg.v_max, cfg.v_max, d)
    return Particle(position=x, velocity=v, rng=rng)


class StallMonitor:
    """Stop once the best value gains less than ``tol`` over ``window`` iterations."""

    def __init__(self, window, tol):
        self.window = window
        self.tol = tol
        self.history = []

    def update(self, best):
        self.history.append(best)
        if len(self.history) <= self.window:
            return False
        old = self.history[-1 - self.window]
        if not np.isfinite(best):
            return False
        if not np.isfinite(old):
            return False
        return best - old < self.tol
