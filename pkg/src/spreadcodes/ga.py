"""Elitist genetic algorithm over code families, for benchmarking.

Minimizes the same max(mean-square auto, mean-square cross) objective as the
search-distribution trainer: fitness-proportionate selection, uniform
crossover, independent per-bit mutation, and a copied-through elite that
makes the best objective exactly non-increasing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bitseq import CodeFamily
from .correlation import ObjectiveReport, evaluate_chips
from .nes import IterationRecord, TrainLog

__all__ = [
    "GaConfig",
    "Individual",
    "GaResult",
    "selection_probabilities",
    "select_parent",
    "crossover_uniform",
    "mutate",
    "ga_run",
]

_FITNESS_EPS = 1e-12


@dataclass(frozen=True)
class GaConfig:
    num_codes: int
    code_length: int
    population_size: int = 100
    num_iterations: int = 10_000
    elite_rate: float = 0.01
    mutation_rate: float = 0.005
    master_seed: int = 0
    eval_method: str = "auto"

    def __post_init__(self):
        if self.num_codes < 2:
            raise ValueError(f"need at least 2 codes, got {self.num_codes}")
        if self.code_length < 2:
            raise ValueError(f"code length must be >= 2, got {self.code_length}")
        if self.population_size < 2:
            raise ValueError(f"population size must be >= 2, got {self.population_size}")
        if self.num_iterations < 1:
            raise ValueError(f"iteration count must be >= 1, got {self.num_iterations}")
        if not 0.0 < self.mutation_rate < 1.0:
            raise ValueError(f"mutation rate must lie in (0, 1), got {self.mutation_rate}")
        if not 0.0 <= self.elite_rate <= 1.0:
            raise ValueError(f"elite rate must lie in [0, 1], got {self.elite_rate}")

    @property
    def elite_count(self) -> int:
        return max(1, round(self.elite_rate * self.population_size))

    @property
    def genome_length(self) -> int:
        return self.num_codes * self.code_length


@dataclass(frozen=True)
class Individual:
    """One candidate family as a flat genome with its cached score."""

    genome: np.ndarray
    report: ObjectiveReport

    def family(self, num_codes: int, code_length: int) -> CodeFamily:
        return CodeFamily(self.genome.reshape(num_codes, code_length))


@dataclass
class GaResult:
    best: CodeFamily
    report: ObjectiveReport
    log: TrainLog
    config: GaConfig


def selection_probabilities(objectives: np.ndarray) -> np.ndarray:
    """Fitness-proportionate weights for a minimized objective.

    fitness_i = (f_max - f_i) + eps, normalized; an all-equal population
    degenerates to uniform selection.
    """
    objectives = np.asarray(objectives, dtype=np.float64)
    fitness = (objectives.max() - objectives) + _FITNESS_EPS
    return fitness / fitness.sum()


def select_parent(population: list, rng: np.random.Generator) -> Individual:
    """Draw one individual with probability proportional to its fitness."""
    if not population:
        raise ValueError("population is empty")
    probs = selection_probabilities(np.array([ind.report.f for ind in population]))
    return population[int(rng.choice(len(population), p=probs))]


def crossover_uniform(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-position fair-coin recombination of two genomes.

    Child 1 takes each bit from parent a or b by independent coin flip;
    child 2 takes the complementary parent at every position.
    """
    if a.shape != b.shape:
        raise ValueError(f"genome length mismatch: {a.shape} vs {b.shape}")
    from_a = rng.random(a.size) < 0.5
    child1 = np.where(from_a, a, b).astype(np.uint8)
    child2 = np.where(from_a, b, a).astype(np.uint8)
    return child1, child2


def mutate(genome: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit independently with the given probability."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must lie in [0, 1], got {rate}")
    flips = rng.random(genome.size) < rate
    return genome ^ flips.astype(np.uint8)


def _evaluate(genome: np.ndarray, cfg: GaConfig) -> Individual:
    report = evaluate_chips(genome.reshape(cfg.num_codes, cfg.code_length), cfg.eval_method)
    return Individual(genome=genome, report=report)


def ga_run(cfg: GaConfig) -> GaResult:
    """Evolve for the configured number of generations and return the best.

    Log row 0 describes the random initial population; each later row is one
    assembled generation, giving the same per-row evaluation budget as one
    training batch of the gradient-based optimizer. The baseline column holds
    the population mean and grad_norm is fixed at 0.0 (schema compatibility).
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed))
    started = time.perf_counter()

    population = [
        _evaluate(rng.integers(0, 2, size=cfg.genome_length, dtype=np.uint8), cfg)
        for _ in range(cfg.population_size)
    ]

    log = TrainLog()
    best: Individual | None = None
    for generation in range(cfg.num_iterations):
        if generation > 0:
            order = np.argsort([ind.report.f for ind in population], kind="stable")
            elite = [population[i] for i in order[: cfg.elite_count]]
            probs = selection_probabilities(np.array([ind.report.f for ind in population]))
            offspring = list(elite)
            while len(offspring) < cfg.population_size:
                pa = population[int(rng.choice(cfg.population_size, p=probs))]
                pb = population[int(rng.choice(cfg.population_size, p=probs))]
                child1, child2 = crossover_uniform(pa.genome, pb.genome, rng)
                offspring.append(_evaluate(mutate(child1, cfg.mutation_rate, rng), cfg))
                if len(offspring) < cfg.population_size:
                    offspring.append(_evaluate(mutate(child2, cfg.mutation_rate, rng), cfg))
            population = offspring

        objectives = np.array([ind.report.f for ind in population])
        gen_best = int(np.argmin(objectives))
        if best is None or objectives[gen_best] < best.report.f:
            best = population[gen_best]
        log.records.append(
            IterationRecord(
                iteration=generation,
                mean_f=float(np.mean(objectives)),
                min_f=float(objectives[gen_best]),
                baseline=float(np.mean(objectives)),
                best_f=best.report.f,
                grad_norm=0.0,
            )
        )

    log.wall_clock_s = time.perf_counter() - started
    return GaResult(
        best=best.family(cfg.num_codes, cfg.code_length),
        report=best.report,
        log=log,
        config=cfg,
    )
