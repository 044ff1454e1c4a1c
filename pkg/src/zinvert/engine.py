"""Population-based search for the latent vector whose features match a target.

One generation: evaluate, keep the best fraction as parents, refill with
mutated crossover children. Parents survive unchanged, so the best fitness
never increases between generations.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidConfigError,
    ModelFailureError,
    UnevaluatedPopulationError,
)
from .models import Extractor, FloatArray, Generator, resolve_metric

TERMINATED_BY_PATIENCE = "patience"
TERMINATED_BY_MAX_GENERATIONS = "max_generations"


@dataclass
class Individual:
    """One candidate latent with its cached fitness (None until evaluated)."""

    latent: FloatArray
    fitness: float | None = None


@dataclass
class Population:
    members: list[Individual]
    generation_index: int = 0

    def __len__(self) -> int:
        return len(self.members)

    def best(self) -> Individual:
        """Member with the smallest fitness; ties go to the lower index."""
        fitnesses = self.fitnesses()
        idx = min(range(len(self.members)), key=lambda i: (fitnesses[i], i))
        return self.members[idx]

    def fitnesses(self) -> list[float]:
        values = []
        for i, member in enumerate(self.members):
            if member.fitness is None:
                raise UnevaluatedPopulationError(f"member {i} has no fitness")
            values.append(member.fitness)
        return values


def parent_count(population_size: int, selection_rate: float) -> int:
    # Guarded ceil: float noise in s*t must not change the integer result.
    return math.ceil(selection_rate * population_size - 1e-9)


@dataclass(frozen=True)
class GaConfig:
    """Search settings. Defaults are the shipped configuration; the tuned
    preset (selection_rate=0.2, mutation_ratio=0.1) is exposed by
    :func:`tuned_config`."""

    population_size: int = 256
    selection_rate: float = 0.3
    mutation_ratio: float = 0.3
    max_generations: int = 1000
    patience: int = 20
    restarts: int = 3
    rng_seed: int = 0
    distance_metric: str = "cosine"

    def __post_init__(self):
        if self.population_size < 2:
            raise InvalidConfigError("population_size must be at least 2")
        if not 0.0 < self.selection_rate < 1.0:
            raise InvalidConfigError("selection_rate must be in (0, 1)")
        if not 0.0 <= self.mutation_ratio <= 1.0:
            raise InvalidConfigError("mutation_ratio must be in [0, 1]")
        if self.max_generations < 1:
            raise InvalidConfigError("max_generations must be positive")
        if self.patience < 1:
            raise InvalidConfigError("patience must be positive")
        if self.restarts < 1:
            raise InvalidConfigError("restarts must be positive")
        if self.parent_pool_size < 2:
            raise InvalidConfigError(
                "selection must keep at least two parents; "
                f"got ceil({self.selection_rate} * {self.population_size}) = "
                f"{self.parent_pool_size}"
            )
        resolve_metric(self.distance_metric)

    @property
    def parent_pool_size(self) -> int:
        return parent_count(self.population_size, self.selection_rate)

    @property
    def children_per_generation(self) -> int:
        return self.population_size - self.parent_pool_size


def tuned_config(**overrides) -> GaConfig:
    """Preset that ablation found best: smaller parent pool, light mutation."""
    settings = dict(selection_rate=0.2, mutation_ratio=0.1)
    settings.update(overrides)
    return GaConfig(**settings)


@dataclass
class FitnessTrace:
    """Per-generation best/mean fitness, entry 0 being the initial population."""

    best_fitness_per_generation: list[float] = field(default_factory=list)
    mean_fitness_per_generation: list[float] = field(default_factory=list)
    terminated_by: str = TERMINATED_BY_MAX_GENERATIONS

    @property
    def final_best(self) -> float:
        return self.best_fitness_per_generation[-1]

    @property
    def generations(self) -> int:
        """Number of evolution steps taken (excludes the initial population)."""
        return len(self.best_fitness_per_generation) - 1


@dataclass
class InversionResult:
    best_latent: FloatArray
    best_fitness: float
    trace: FitnessTrace


@dataclass
class MultiInversionResult:
    runs: list[InversionResult]
    best_index: int

    @property
    def best(self) -> InversionResult:
        return self.runs[self.best_index]

    @property
    def traces(self) -> list[FitnessTrace]:
        return [run.trace for run in self.runs]


def init_population(
    population_size: int, latent_dim: int, rng: np.random.Generator
) -> Population:
    """Fresh cohort of standard-Gaussian latents, none evaluated yet."""
    if population_size < 2:
        raise InvalidConfigError("population_size must be at least 2")
    if latent_dim < 1:
        raise InvalidConfigError("latent_dim must be positive")
    latents = rng.standard_normal((population_size, latent_dim))
    return Population([Individual(latents[i]) for i in range(population_size)])


def evaluate_fitness(
    pop: Population,
    generator: Generator,
    extractor: Extractor,
    target: FloatArray,
    metric: str = "cosine",
) -> Population:
    """Fill in fitness for every unevaluated member, in one batched model pass.

    Members with a cached fitness are left untouched (latents are never
    mutated in place, so the cache stays valid).
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (extractor.feature_dim,):
        raise ModelFailureError(
            f"target dimension {target.shape} does not match extractor "
            f"feature_dim {extractor.feature_dim}"
        )
    distance = resolve_metric(metric)
    pending = [i for i, member in enumerate(pop.members) if member.fitness is None]
    if not pending:
        return pop

    batch = np.stack([pop.members[i].latent for i in pending])
    images = np.asarray(generator.generate(batch), dtype=float)
    expected = (len(pending), *generator.image_shape)
    if images.shape != expected:
        raise ModelFailureError(
            f"generator returned shape {images.shape}, expected {expected}"
        )
    _check_finite(images, pending, "generator")

    flat = images.reshape(len(pending), -1)
    features = np.asarray(extractor.extract(flat), dtype=float)
    if features.shape != (len(pending), extractor.feature_dim):
        raise ModelFailureError(
            f"extractor returned shape {features.shape}, expected "
            f"{(len(pending), extractor.feature_dim)}"
        )
    _check_finite(features, pending, "extractor")

    for row, i in enumerate(pending):
        pop.members[i].fitness = distance(features[row], target)
    return pop


def _check_finite(batch: FloatArray, indices: list[int], source: str) -> None:
    finite_rows = np.isfinite(batch).all(axis=tuple(range(1, batch.ndim)))
    if not finite_rows.all():
        row = int(np.flatnonzero(~finite_rows)[0])
        raise ModelFailureError(
            f"{source} produced non-finite values for member {indices[row]}",
            index=indices[row],
        )


def select_parents(pop: Population, selection_rate: float) -> list[Individual]:
    """The ceil(rate * size) members with smallest fitness, ties by index."""
    fitnesses = pop.fitnesses()
    keep = parent_count(len(pop.members), selection_rate)
    order = sorted(range(len(pop.members)), key=lambda i: (fitnesses[i], i))
    return [pop.members[i] for i in order[:keep]]


def crossover(
    parent_a: FloatArray, parent_b: FloatArray, rng: np.random.Generator
) -> FloatArray:
    """Single-point crossover with the cut drawn uniformly from {1..L-1}."""
    a = np.asarray(parent_a, dtype=float)
    b = np.asarray(parent_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError(
            f"crossover needs equal-length vectors, got {a.shape} and {b.shape}"
        )
    if a.size == 1:
        return a.copy()
    cut = int(rng.integers(1, a.size))
    return np.concatenate([a[:cut], b[cut:]])


def mutate(
    latent: FloatArray, mutation_ratio: float, rng: np.random.Generator
) -> FloatArray:
    """Each entry independently gains one N(0,1) draw with probability m."""
    if not 0.0 <= mutation_ratio <= 1.0:
        raise InvalidConfigError("mutation_ratio must be in [0, 1]")
    latent = np.asarray(latent, dtype=float)
    out = latent.copy()
    mask = rng.random(latent.size) < mutation_ratio
    hits = int(mask.sum())
    if hits:
        out[mask] += rng.standard_normal(hits)
    return out


def _distinct_pair(rng: np.random.Generator, n: int) -> tuple[int, int]:
    first = int(rng.integers(n))
    second = int(rng.integers(n - 1))
    if second >= first:
        second += 1
    return first, second


def step_generation(
    pop: Population,
    config: GaConfig,
    generator: Generator,
    extractor: Extractor,
    target: FloatArray,
    rng: np.random.Generator,
) -> Population:
    """Produce the next generation: parents carried over, children evaluated."""
    evaluate_fitness(pop, generator, extractor, target, config.distance_metric)
    parents = select_parents(pop, config.selection_rate)
    children = []
    for _ in range(config.population_size - len(parents)):
        i, j = _distinct_pair(rng, len(parents))
        child = crossover(parents[i].latent, parents[j].latent, rng)
        children.append(Individual(mutate(child, config.mutation_ratio, rng)))
    nxt = Population(
        members=list(parents) + children,
        generation_index=pop.generation_index + 1,
    )
    return evaluate_fitness(nxt, generator, extractor, target, config.distance_metric)


def run_inversion(
    target: FloatArray,
    generator: Generator,
    extractor: Extractor,
    config: GaConfig,
) -> InversionResult:
    """Evolve until the best fitness stalls for `patience` generations or the
    generation cap is hit. Fully deterministic under config.rng_seed."""
    rng = np.random.default_rng(config.rng_seed)
    pop = init_population(config.population_size, generator.latent_dim, rng)
    evaluate_fitness(pop, generator, extractor, target, config.distance_metric)

    trace = FitnessTrace()
    _record(trace, pop)
    best_so_far = trace.best_fitness_per_generation[0]
    stagnant = 0
    trace.terminated_by = TERMINATED_BY_MAX_GENERATIONS
    for _ in range(config.max_generations):
        pop = step_generation(pop, config, generator, extractor, target, rng)
        _record(trace, pop)
        current = trace.best_fitness_per_generation[-1]
        if current < best_so_far:
            best_so_far = current
            stagnant = 0
        else:
            stagnant += 1
        if stagnant >= config.patience:
            trace.terminated_by = TERMINATED_BY_PATIENCE
            break

    winner = pop.best()
    return InversionResult(
        best_latent=winner.latent.copy(),
        best_fitness=float(winner.fitness),
        trace=trace,
    )


def _record(trace: FitnessTrace, pop: Population) -> None:
    fitnesses = pop.fitnesses()
    trace.best_fitness_per_generation.append(min(fitnesses))
    trace.mean_fitness_per_generation.append(float(np.mean(fitnesses)))


def run_inversion_multi(
    target: FloatArray,
    generator: Generator,
    extractor: Extractor,
    config: GaConfig,
) -> MultiInversionResult:
    """Independent restarts on derived seeds (seed, seed+1, ...); returns all
    runs plus the index of the one with the smallest final fitness."""
    runs = []
    for k in range(config.restarts):
        cfg = dataclasses.replace(config, rng_seed=config.rng_seed + k)
        runs.append(run_inversion(target, generator, extractor, cfg))
    best_index = min(range(len(runs)), key=lambda k: (runs[k].best_fitness, k))
    return MultiInversionResult(runs=runs, best_index=best_index)
