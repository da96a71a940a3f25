"""Constrained evolutionary search and a random-search baseline.

The loop keeps a fixed-size population of scored candidates. Each iteration
samples a pool, mutates a parent drawn from the pool's top-k, and, if the
child satisfies the space's constraints, scores it, inserts it, and evicts
the globally worst member. Constraint-violating children consume the
iteration without insertion.

Determinism: loop decisions draw from one stream keyed by the master seed;
every candidate (initial samples and offspring alike) gets its own stream
keyed by (master_seed, serial). Scoring candidates concurrently therefore
cannot change any outcome, as long as results are reduced in serial order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .arch import ArchDescriptor, SearchSpace, arch_id, mutate
from .metrics import ProxyScore
from .network import sample_random, satisfies_constraints
from .rng import stream

# Loop-decision stream id, far above any candidate serial.
_LOOP_STREAM = 1 << 63

Fitness = Callable[[ArchDescriptor], ProxyScore]


@dataclass(frozen=True)
class EvoConfig:
    population_size: int
    max_iterations: int
    sample_ratio: float
    topk: int
    master_seed: int = 0
    retry_mutation: bool = False

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.sample_ratio <= 1:
            raise ValueError(f"sample_ratio must be in (0, 1], got {self.sample_ratio}")
        pool = math.ceil(self.sample_ratio * self.population_size)
        if not 1 <= self.topk <= pool:
            raise ValueError(
                f"topk must be in [1, ceil(sample_ratio * population_size)] = [1, {pool}],"
                f" got {self.topk}"
            )

    @property
    def pool_size(self) -> int:
        return math.ceil(self.sample_ratio * self.population_size)


@dataclass
class SearchState:
    population: list[tuple[ArchDescriptor, ProxyScore]]
    history: list[float]
    best: tuple[ArchDescriptor, ProxyScore]
    evaluations: int
    log: list[dict] = field(default_factory=list)


def get_topk(pool: list[tuple[ArchDescriptor, ProxyScore]], k: int) -> list[tuple[ArchDescriptor, ProxyScore]]:
    """The k highest-scoring members; ties keep earlier pool order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(pool, key=lambda member: -member[1].value)
    return ranked[:k]


def _log_record(iteration: int, best: tuple[ArchDescriptor, ProxyScore], evaluations: int) -> dict:
    return {
        "iter": iteration,
        "best_score": best[1].value,
        "best_arch": arch_id(best[0]),
        "evals": evaluations,
    }


def evolve(space: SearchSpace, fitness: Fitness, cfg: EvoConfig) -> SearchState:
    """Run exactly cfg.max_iterations evolution steps; fully seeded."""
    loop_rng = stream(cfg.master_seed, _LOOP_STREAM)
    population: list[tuple[ArchDescriptor, ProxyScore]] = []
    evaluations = 0
    serial = 0

    for _ in range(cfg.population_size):
        desc = sample_random(space, stream(cfg.master_seed, serial))
        serial += 1
        score = fitness(desc)
        evaluations += 1
        population.append((desc, score))

    best = max(population, key=lambda member: member[1].value)
    history: list[float] = []
    log: list[dict] = []

    for iteration in range(cfg.max_iterations):
        picks = loop_rng.choice(len(population), size=cfg.pool_size, replace=False)
        picks.sort()
        pool = [population[int(i)] for i in picks]
        top = get_topk(pool, cfg.topk)
        parent = top[int(loop_rng.integers(len(top)))]

        child_rng = stream(cfg.master_seed, serial)
        serial += 1
        child = mutate(parent[0], space, child_rng)
        if cfg.retry_mutation and not satisfies_constraints(child, space):
            for _ in range(100):
                child = mutate(parent[0], space, child_rng)
                if satisfies_constraints(child, space):
                    break

        if satisfies_constraints(child, space):
            score = fitness(child)
            evaluations += 1
            population.append((child, score))
            worst = min(range(len(population)), key=lambda i: population[i][1].value)
            population.pop(worst)
            if score.value > best[1].value:
                best = (child, score)

        history.append(best[1].value)
        log.append(_log_record(iteration, best, evaluations))

    return SearchState(population, history, best, evaluations, log)


def random_search(space: SearchSpace, fitness: Fitness, budget: int, seed: int = 0) -> SearchState:
    """budget independent constraint-satisfying draws; keep the argmax.

    Candidate streams are keyed exactly like evolve's, so paired comparisons
    at equal budget see the same sampling randomness.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    population: list[tuple[ArchDescriptor, ProxyScore]] = []
    history: list[float] = []
    log: list[dict] = []
    best: tuple[ArchDescriptor, ProxyScore] | None = None
    for serial in range(budget):
        desc = sample_random(space, stream(seed, serial))
        score = fitness(desc)
        population.append((desc, score))
        if best is None or score.value > best[1].value:
            best = (desc, score)
        history.append(best[1].value)
        log.append(_log_record(serial, best, serial + 1))
    return SearchState(population, history, best, budget, log)
