"""Univariate marginal distribution search over band-inclusion genomes.

Each generation samples individuals gene-by-gene from independent Bernoulli
marginals, keeps the fittest mu as parents, re-estimates every marginal as
the relative frequency of ones among the parents, and fills the population
back up with freshly sampled children (parents survive by union). Marginals
may optionally be clamped to [1/n, 1 - 1/n] to stop genes from fixating.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .svm import FitnessValue

ALL_ZERO_RESAMPLES = 100


@dataclass(frozen=True)
class Individual:
    genome: tuple[int, ...]
    fitness: FitnessValue | None = None

    def __post_init__(self):
        genome = tuple(int(b) for b in self.genome)
        if any(b not in (0, 1) for b in genome):
            raise ValueError("genome bits must be 0 or 1")
        object.__setattr__(self, "genome", genome)

    @property
    def n_bands(self) -> int:
        return sum(self.genome)

    def bands(self) -> list[str]:
        return [f"B{i + 1}" for i, bit in enumerate(self.genome) if bit]


@dataclass(frozen=True)
class MarginalModel:
    p: tuple[float, ...]
    margins: tuple[float, float] | None = None

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        if any(not 0.0 <= v <= 1.0 for v in p):
            raise ValueError("marginals must lie in [0, 1]")
        if self.margins is not None:
            lo, hi = self.margins
            if any(not lo <= v <= hi for v in p):
                raise ValueError(f"marginals must lie in [{lo}, {hi}]")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class UmdaConfig:
    population: int = 10
    parents: int = 5
    generations: int = 10
    margins: bool = False
    seed: int = 0
    genome_length: int = 7

    def __post_init__(self):
        if self.parents < 1 or self.parents > self.population:
            raise ValueError("need 1 <= parents <= population")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.genome_length < 1:
            raise ValueError("genome_length must be >= 1")

    @property
    def offspring(self) -> int:
        return self.population - self.parents

    def margin_bounds(self) -> tuple[float, float] | None:
        if not self.margins:
            return None
        n = self.genome_length
        return 1.0 / n, (n - 1.0) / n


@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    population: list[Individual]
    marginals: tuple[float, ...]


@dataclass
class RunResult:
    config: UmdaConfig
    generations: list[GenerationStats]
    best: Individual
    evaluations: int
    requests: int

    @property
    def final_population(self) -> list[Individual]:
        return self.generations[-1].population


def sample(model: MarginalModel, rng: np.random.Generator) -> Individual:
    """Draw one genome, gene i ~ Bernoulli(p[i]) independently."""
    p = np.asarray(model.p)
    bits = (rng.random(p.shape[0]) < p).astype(int)
    return Individual(genome=tuple(int(b) for b in bits))


def sample_nonempty(model: MarginalModel, rng: np.random.Generator) -> Individual:
    """Like :func:`sample` but re-draws all-zero genomes.

    After ``ALL_ZERO_RESAMPLES`` failed draws one uniformly random gene is
    forced to 1, so the result always selects at least one band.
    """
    for _ in range(ALL_ZERO_RESAMPLES):
        ind = sample(model, rng)
        if ind.n_bands > 0:
            return ind
    bits = list(ind.genome)
    bits[int(rng.integers(len(bits)))] = 1
    return Individual(genome=tuple(bits))


def update_marginals(parents: Sequence[Individual], cfg: UmdaConfig) -> MarginalModel:
    """p[i] = relative frequency of ones at gene i among the parents."""
    if not parents:
        raise ValueError("parent set must be nonempty")
    genomes = np.array([ind.genome for ind in parents], dtype=np.float64)
    if genomes.shape[1] != cfg.genome_length:
        raise ValueError("parent genome length differs from config")
    p = genomes.mean(axis=0)
    bounds = cfg.margin_bounds()
    if bounds is not None:
        p = np.clip(p, bounds[0], bounds[1])
    return MarginalModel(p=tuple(float(v) for v in p), margins=bounds)


def _fitness_of(ind: Individual) -> float:
    if ind.fitness is None:
        raise ValueError(f"individual {ind.genome} has no fitness")
    return ind.fitness.balanced_accuracy


def select_parents(population: Sequence[Individual], mu: int) -> list[Individual]:
    """Top-mu by fitness; ties prefer fewer bands, then lexicographic genome."""
    ranked = sorted(population, key=lambda ind: (-_fitness_of(ind), ind.n_bands, ind.genome))
    return ranked[:mu]


def run(cfg: UmdaConfig, oracle: Callable[[tuple[int, ...]], FitnessValue]) -> RunResult:
    """Full evolutionary loop; reproducible for a fixed (config, oracle)."""
    rng = np.random.default_rng(cfg.seed)
    requests = 0
    fresh: set[tuple[int, ...]] = set()

    def evaluate(inds: list[Individual]) -> list[Individual]:
        nonlocal requests
        out = []
        for ind in inds:
            if ind.fitness is None:
                requests += 1
                if ind.genome not in fresh:
                    fresh.add(ind.genome)
                out.append(Individual(genome=ind.genome, fitness=oracle(ind.genome)))
            else:
                out.append(ind)
        return out

    model = MarginalModel(
        p=tuple([0.5] * cfg.genome_length), margins=cfg.margin_bounds()
    )
    population = [sample_nonempty(model, rng) for _ in range(cfg.population)]
    stats: list[GenerationStats] = []
    for gen in range(cfg.generations):
        population = evaluate(population)
        values = [_fitness_of(ind) for ind in population]
        stats.append(
            GenerationStats(
                generation=gen,
                best=max(values),
                mean=float(np.mean(values)),
                population=list(population),
                marginals=model.p,
            )
        )
        if gen == cfg.generations - 1:
            break
        parents = select_parents(population, cfg.parents)
        model = update_marginals(parents, cfg)
        children = [sample_nonempty(model, rng) for _ in range(cfg.offspring)]
        population = parents + children

    best = select_parents(stats[-1].population, 1)[0]
    return RunResult(
        config=cfg,
        generations=stats,
        best=best,
        evaluations=len(fresh),
        requests=requests,
    )


@dataclass(frozen=True)
class BandRanking:
    band_names: tuple[str, ...]
    frequencies: tuple[float, ...]
    ranks: tuple[int | None, ...]  # competition ranks; None for zero frequency
    pool_size: int


def rank_bands(pool: Sequence[Individual], top_k: int | None = None) -> BandRanking:
    """Per-band relative frequency over the fittest individuals of a pool.

    The pool is sorted by descending fitness (ties prefer fewer bands, then
    lexicographic genome). With ``top_k`` the cut keeps every individual whose
    fitness matches the k-th best, so ties never drop arbitrarily. Bands are
    ranked by descending frequency, equal frequencies sharing the better rank;
    unused bands are unranked.
    """
    pool = list(pool)
    if not pool:
        raise ValueError("empty pool")
    ranked = sorted(pool, key=lambda ind: (-_fitness_of(ind), ind.n_bands, ind.genome))
    if top_k is not None:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        if top_k < len(ranked):
            cutoff = _fitness_of(ranked[top_k - 1])
            ranked = [ind for ind in ranked if _fitness_of(ind) >= cutoff]
    n = len(ranked[0].genome)
    genomes = np.array([ind.genome for ind in ranked], dtype=np.float64)
    freqs = genomes.mean(axis=0)
    order = np.argsort(-freqs, kind="stable")
    ranks: list[int | None] = [None] * n
    position = 0
    prev = None
    for idx, band in enumerate(order):
        f = freqs[band]
        if f <= 0:
            continue
        if prev is None or f < prev:
            position = idx + 1
            prev = f
        ranks[band] = position
    return BandRanking(
        band_names=tuple(f"B{i + 1}" for i in range(n)),
        frequencies=tuple(float(f) for f in freqs),
        ranks=tuple(ranks),
        pool_size=len(ranked),
    )


def pool_final_populations(results: Sequence[RunResult]) -> list[Individual]:
    """Distinct final-population genomes per run, pooled across runs."""
    pool = []
    for result in results:
        seen = set()
        for ind in result.final_population:
            if ind.genome not in seen:
                seen.add(ind.genome)
                pool.append(ind)
    return pool


def individual_to_json(ind: Individual) -> dict:
    obj: dict = {"genome": "".join(map(str, ind.genome)), "bands": ind.bands()}
    if ind.fitness is not None:
        obj["fitness"] = {
            "balanced_accuracy": ind.fitness.balanced_accuracy,
            "recall_forest": ind.fitness.recall_forest,
            "recall_nonforest": ind.fitness.recall_nonforest,
            "split": ind.fitness.split,
        }
    return obj


def save_run_result(result: RunResult, path) -> None:
    obj = {
        "config": {
            "population": result.config.population,
            "parents": result.config.parents,
            "generations": result.config.generations,
            "margins": result.config.margins,
            "seed": result.config.seed,
            "genome_length": result.config.genome_length,
        },
        "generations": [
            {
                "generation": g.generation,
                "best": g.best,
                "mean": g.mean,
                "marginals": list(g.marginals),
                "population": [individual_to_json(ind) for ind in g.population],
            }
            for g in result.generations
        ],
        "best": individual_to_json(result.best),
        "evaluations": result.evaluations,
        "requests": result.requests,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def ranking_to_json(ranking: BandRanking) -> dict:
    return {
        "bands": list(ranking.band_names),
        "frequencies": list(ranking.frequencies),
        "ranks": list(ranking.ranks),
        "pool_size": ranking.pool_size,
    }


def ranking_table(ranking: BandRanking) -> str:
    """Aligned plain-text table of frequencies and ranks."""
    header = ["band", "frequency", "rank"]
    rows = []
    for name, freq, rank in zip(ranking.band_names, ranking.frequencies, ranking.ranks):
        rows.append([name, f"{freq * 100:.1f}%", "-" if rank is None else str(rank)])
    widths = [max(len(r[c]) for r in [header] + rows) for c in range(3)]
    lines = ["  ".join(h.ljust(widths[c]) for c, h in enumerate(header))]
    lines.append("  ".join("-" * widths[c] for c in range(3)))
    for row in rows:
        lines.append("  ".join(row[c].ljust(widths[c]) for c in range(3)))
    return "\n".join(lines) + "\n"
