"""Genetic algorithm over genomes: selection, crossover, mutation, generations.

Crossover cuts are restricted to layer-block boundaries, so a child's layer
blocks each come intact from one parent and the two trailing cross-layer
genes always travel as a unit. Survivor selection is elitist truncation over
parents plus offspring, which makes the best fitness monotone by
construction. Ablation freezes restrict gene domains during initialization
and mutation rather than patching individuals afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .genome import (
    DEFAULT_DOMAINS,
    GeneDomains,
    Genome,
    GenomeConfig,
    decode,
    encode,
    genome_id,
    random_genome,
)

STATS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EvolutionConfig:
    n_pop: int = 50
    n_offs: int = 50
    generations: int = 80
    crossover_prob: float = 0.3
    mutation_prob: float = 0.02
    tournament_size: int = 3
    top_k: int = 10
    seed: int = 0
    freeze_meso: Optional[int] = None
    freeze_macro_g1: Optional[int] = None

    def __post_init__(self):
        if self.n_pop < 2:
            raise ValueError("n_pop must be >= 2")
        if self.n_offs < 1:
            raise ValueError("n_offs must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        if not 1 <= self.top_k <= self.n_pop:
            raise ValueError("top_k must be in [1, n_pop]")
        if self.freeze_meso is not None and self.freeze_meso not in (1, 2, 3, 4, 5):
            raise ValueError("freeze_meso must be a motif gene value 1..5")
        if self.freeze_macro_g1 is not None and self.freeze_macro_g1 not in (1, 2, 3):
            raise ValueError("freeze_macro_g1 must be 1, 2 or 3")


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    fitness_variance: float
    best_id: str


def stats_to_json(st: GenerationStats) -> dict:
    return {
        "schema_version": STATS_SCHEMA_VERSION,
        "generation": st.generation,
        "best_fitness": st.best_fitness,
        "mean_fitness": st.mean_fitness,
        "fitness_variance": st.fitness_variance,
        "best_id": st.best_id,
    }


def domains_for(cfg: EvolutionConfig) -> GeneDomains:
    """Gene domains with any ablation freezes applied.

    Freezing the meso scale still allows empty layers, so depth keeps
    evolving; freezing g1 collapses its domain to a single value.
    """
    m = DEFAULT_DOMAINS.m if cfg.freeze_meso is None else (0, cfg.freeze_meso)
    g1 = DEFAULT_DOMAINS.g1 if cfg.freeze_macro_g1 is None else (cfg.freeze_macro_g1,)
    return GeneDomains(x=DEFAULT_DOMAINS.x, m=m, g1=g1, g2=DEFAULT_DOMAINS.g2)


def tournament_select(
    pop: Sequence,
    fitness: Sequence,
    n_select: int,
    tournament_size: int,
    rng: np.random.Generator,
) -> list:
    """Each parent is the best of a uniformly drawn tournament (no repeats
    within a tournament, independent draws across tournaments)."""
    if not pop:
        raise ValueError("empty population")
    if len(fitness) != len(pop):
        raise ValueError("fitness must align with population")
    if n_select < 1:
        raise ValueError("n_select must be >= 1")
    size = min(tournament_size, len(pop))
    fit = np.asarray(fitness, dtype=np.float64)
    parents = []
    for _ in range(n_select):
        entrants = rng.choice(len(pop), size=size, replace=False)
        winner = entrants[int(np.argmax(fit[entrants]))]
        parents.append(pop[int(winner)])
    return parents


def _block_boundaries(gcfg: GenomeConfig) -> list:
    step = gcfg.genes_per_layer + 1
    return [i * step for i in range(gcfg.max_layers + 1)]


def crossover_at(a: Genome, b: Genome, gcfg: GenomeConfig, c1: int, c2: int) -> tuple:
    """Exchange the flat segment [c1, c2) between two parents."""
    va, vb = encode(a), encode(b)
    if len(va) != gcfg.flat_length or len(vb) != gcfg.flat_length:
        raise ValueError("parents do not match the genome config")
    if c1 > c2:
        c1, c2 = c2, c1
    child_a = va[:c1] + vb[c1:c2] + va[c2:]
    child_b = vb[:c1] + va[c1:c2] + vb[c2:]
    return decode(child_a, gcfg), decode(child_b, gcfg)


def two_point_crossover(
    a: Genome,
    b: Genome,
    gcfg: GenomeConfig,
    rng: np.random.Generator,
    crossover_prob: float = 1.0,
) -> tuple:
    """Swap the flat segment between two layer-block boundaries.

    The boundary set stops before g1, so the trailing (g1, g2) pair can only
    change hands whole, as part of the suffix. Equal cut points clone the
    parents, as does the (1 - crossover_prob) branch.
    """
    if rng.random() >= crossover_prob:
        if len(encode(a)) != gcfg.flat_length or len(encode(b)) != gcfg.flat_length:
            raise ValueError("parents do not match the genome config")
        return a, b
    bounds = _block_boundaries(gcfg)
    c1 = bounds[rng.integers(len(bounds))]
    c2 = bounds[rng.integers(len(bounds))]
    return crossover_at(a, b, gcfg, c1, c2)


def _gene_kinds(gcfg: GenomeConfig) -> list:
    kinds = []
    for _ in range(gcfg.max_layers):
        kinds.append("m")
        kinds.extend(["x"] * gcfg.genes_per_layer)
    kinds.extend(["g1", "g2"])
    return kinds


def bitflip_mutate(
    g: Genome,
    p: float,
    rng: np.random.Generator,
    gcfg: GenomeConfig,
    domains: GeneDomains = DEFAULT_DOMAINS,
) -> Genome:
    """Re-draw each gene with probability p, uniformly excluding its value."""
    flat = encode(g)
    kinds = _gene_kinds(gcfg)
    hits = np.flatnonzero(rng.random(len(flat)) < p)
    for i in hits:
        domain = getattr(domains, kinds[i])
        alts = [val for val in domain if val != flat[i]]
        if alts:
            flat[i] = alts[rng.integers(len(alts))]
    return decode(flat, gcfg)


def transfer_population(
    imports: Sequence,
    cfg: EvolutionConfig,
    gcfg: Optional[GenomeConfig] = None,
) -> list:
    """Cyclically replicate imported genomes up to the population size."""
    if not imports:
        raise ValueError("no genomes to transfer")
    if gcfg is not None:
        for g in imports:
            if len(encode(g)) != gcfg.flat_length:
                raise ValueError("imported genome does not match the genome config")
    else:
        lengths = {len(encode(g)) for g in imports}
        if len(lengths) > 1:
            raise ValueError("imported genomes have mismatched configs")
    return [imports[i % len(imports)] for i in range(cfg.n_pop)]


def evolve(
    cfg: EvolutionConfig,
    gcfg: GenomeConfig,
    data_provider,
    fitness_fn: Callable,
    initial_population: Optional[Sequence] = None,
    on_generation: Optional[Callable] = None,
):
    """Run the generational loop; returns (history, top-k scored genomes).

    ``data_provider`` supplies the evaluation batches once, up front, so
    fitness stays a fixed function of the genome for the whole run.
    ``fitness_fn(genomes, batches)`` returns one maximized score per genome.
    The per-generation survivor pool is the best n_pop of parents plus
    offspring, parents winning ties.
    """
    rng = np.random.default_rng(cfg.seed)
    domains = domains_for(cfg)
    batches = data_provider() if callable(data_provider) else data_provider

    if initial_population is not None:
        pop = transfer_population(initial_population, cfg, gcfg)
    else:
        pop = [random_genome(gcfg, rng, domains) for _ in range(cfg.n_pop)]
    fit = [float(f) for f in fitness_fn(pop, batches)]

    history = []
    for gen in range(1, cfg.generations + 1):
        offspring = []
        while len(offspring) < cfg.n_offs:
            pa, pb = tournament_select(pop, fit, 2, cfg.tournament_size, rng)
            ca, cb = two_point_crossover(pa, pb, gcfg, rng, cfg.crossover_prob)
            offspring.append(bitflip_mutate(ca, cfg.mutation_prob, rng, gcfg, domains))
            if len(offspring) < cfg.n_offs:
                offspring.append(bitflip_mutate(cb, cfg.mutation_prob, rng, gcfg, domains))
        off_fit = [float(f) for f in fitness_fn(offspring, batches)]

        combined = list(pop) + offspring
        combined_fit = fit + off_fit
        order = sorted(range(len(combined)), key=lambda i: -combined_fit[i])
        keep = order[: cfg.n_pop]
        pop = [combined[i] for i in keep]
        fit = [combined_fit[i] for i in keep]

        stats = GenerationStats(
            generation=gen,
            best_fitness=fit[0],
            mean_fitness=float(np.mean(fit)),
            fitness_variance=float(np.var(fit)),
            best_id=genome_id(pop[0], gcfg),
        )
        history.append(stats)
        if on_generation is not None:
            on_generation(stats)

    order = sorted(range(len(pop)), key=lambda i: -fit[i])
    top = [(pop[i], fit[i]) for i in order[: cfg.top_k]]
    return history, top
