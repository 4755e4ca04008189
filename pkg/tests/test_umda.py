import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandselect.svm import FitnessValue
from bandselect.umda import (
    Individual,
    MarginalModel,
    UmdaConfig,
    pool_final_populations,
    rank_bands,
    run,
    sample,
    sample_nonempty,
    select_parents,
    update_marginals,
)


def fv(value, split="validation"):
    return FitnessValue(value, value, value, split)


def ind(bits, value=None):
    genome = tuple(int(c) for c in bits)
    return Individual(genome=genome, fitness=None if value is None else fv(value))


class TestSample:
    def test_deterministic_marginals(self):
        rng = np.random.default_rng(0)
        model = MarginalModel(p=(1.0,) * 7)
        assert sample(model, rng).genome == (1,) * 7
        model = MarginalModel(p=(1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0))
        assert sample(model, rng).genome == (1, 0, 1, 0, 1, 0, 1)

    def test_per_gene_rates_within_3_sigma(self):
        p = (0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8)
        model = MarginalModel(p=p)
        rng = np.random.default_rng(1)
        n = 20_000
        counts = np.zeros(7)
        for _ in range(n):
            counts += sample(model, rng).genome
        rates = counts / n
        sigma = np.sqrt(np.array(p) * (1 - np.array(p)) / n)
        assert np.all(np.abs(rates - p) <= 3 * sigma)

    def test_nonempty_resampling(self):
        rng = np.random.default_rng(2)
        model = MarginalModel(p=(0.01,) * 7)
        for _ in range(200):
            assert sample_nonempty(model, rng).n_bands >= 1

    def test_forced_gene_when_all_zero(self):
        rng = np.random.default_rng(3)
        model = MarginalModel(p=(0.0,) * 7)
        out = sample_nonempty(model, rng)
        assert out.n_bands == 1


class TestUpdateMarginals:
    def test_column_counting(self):
        parents = [
            ind("1100000"),
            ind("1010000"),
            ind("1001000"),
            ind("1000100"),
            ind("1000010"),
        ]
        model = update_marginals(parents, UmdaConfig())
        assert model.p == (1.0, 0.2, 0.2, 0.2, 0.2, 0.2, 0.0)

    def test_identical_parents_no_margins(self):
        parents = [ind("1010010")] * 5
        model = update_marginals(parents, UmdaConfig(margins=False))
        assert model.p == (1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0)

    def test_margins_clamp(self):
        parents = [ind("1000000")] * 5
        model = update_marginals(parents, UmdaConfig(margins=True))
        assert model.p[0] == pytest.approx(6 / 7)
        assert model.p[6] == pytest.approx(1 / 7)
        assert model.margins == (1 / 7, 6 / 7)

    def test_empty_parents_rejected(self):
        with pytest.raises(ValueError):
            update_marginals([], UmdaConfig())

    @given(st.lists(st.integers(min_value=0, max_value=127), min_size=1, max_size=10))
    @settings(max_examples=40, deadline=None)
    def test_margins_always_bounded(self, raw):
        parents = [
            ind(format(v, "07b")) for v in raw
        ]
        model = update_marginals(parents, UmdaConfig(margins=True))
        assert all(1 / 7 <= p <= 6 / 7 for p in model.p)


class TestSelectParents:
    def test_top_mu(self):
        pop = [
            ind("1000000", 0.9),
            ind("0100000", 0.8),
            ind("0010000", 0.8),
            ind("0001000", 0.7),
            ind("0000100", 0.6),
            ind("0000010", 0.5),
        ]
        parents = select_parents(pop, 5)
        assert [p.fitness.balanced_accuracy for p in parents] == [0.9, 0.8, 0.8, 0.7, 0.6]

    def test_tie_prefers_fewer_bands(self):
        two = ind("1100000", 0.8)
        three = ind("1110000", 0.8)
        assert select_parents([three, two], 1)[0] is two

    def test_tie_then_lexicographic(self):
        a = ind("0110000", 0.8)
        b = ind("1010000", 0.8)
        assert select_parents([b, a], 1)[0] is a

    def test_mu_equals_population(self):
        pop = [ind("1000000", 0.5), ind("0100000", 0.6)]
        assert len(select_parents(pop, 2)) == 2

    def test_unevaluated_rejected(self):
        with pytest.raises(ValueError):
            select_parents([ind("1000000")], 1)


def onemax_oracle(genome):
    value = sum(genome) / len(genome)
    return FitnessValue(value, value, value, "onemax")


class TestRun:
    def test_onemax_benchmark(self):
        cfg_base = dict(population=20, parents=10, generations=50, margins=True, genome_length=20)
        hits = 0
        for seed in range(20):
            result = run(UmdaConfig(seed=seed, **cfg_base), onemax_oracle)
            best_trace = [g.best for g in result.generations]
            assert all(b2 >= b1 - 1e-12 for b1, b2 in zip(best_trace, best_trace[1:]))
            if result.best.genome == (1,) * 20:
                hits += 1
        assert hits >= 18

    def test_constant_fitness_flat_trace(self):
        result = run(
            UmdaConfig(population=8, parents=4, generations=5, seed=0),
            lambda g: fv(0.5),
        )
        assert all(g.best == 0.5 and g.mean == 0.5 for g in result.generations)

    def test_population_size_constant(self):
        result = run(UmdaConfig(population=10, parents=5, generations=6, seed=1), onemax_oracle_7)
        assert all(len(g.population) == 10 for g in result.generations)

    def test_margins_respected_every_generation(self):
        result = run(
            UmdaConfig(population=10, parents=5, generations=8, margins=True, seed=2),
            onemax_oracle_7,
        )
        for g in result.generations:
            assert all(1 / 7 <= p <= 6 / 7 for p in g.marginals)

    def test_evaluation_count_law(self):
        cfg = UmdaConfig(population=10, parents=5, generations=10, seed=3)
        result = run(cfg, onemax_oracle_7)
        bound = cfg.population + (cfg.generations - 1) * cfg.offspring
        assert result.evaluations <= bound

    def test_reproducibility(self):
        cfg = UmdaConfig(population=10, parents=5, generations=10, seed=4)
        a = run(cfg, onemax_oracle_7)
        b = run(cfg, onemax_oracle_7)
        assert [g.population for g in a.generations] == [g.population for g in b.generations]
        assert a.best == b.best

    def test_no_all_zero_genomes(self):
        result = run(UmdaConfig(population=10, parents=5, generations=10, seed=5), onemax_oracle_7)
        for g in result.generations:
            assert all(i.n_bands >= 1 for i in g.population)


def onemax_oracle_7(genome):
    value = sum(genome) / len(genome)
    return FitnessValue(value, value, value, "onemax")


TABLE_POOL = [
    ("1011010", 0.8708),
    ("1011010", 0.8708),
    ("0001000", 0.8664),
    ("0001000", 0.8664),
    ("1011000", 0.8611),
    ("1011000", 0.8611),
    ("0010011", 0.8482),
    ("1001000", 0.8469),
    ("1001000", 0.8469),
    ("0000010", 0.8424),
    ("0010010", 0.8396),
    ("0010010", 0.8396),
    ("1010001", 0.8382),
    ("1011011", 0.8366),
    ("1011011", 0.8366),
    ("1011011", 0.8366),
    ("1011001", 0.8359),
    ("1011001", 0.8359),
    ("0011001", 0.8334),
    ("0011001", 0.8334),
    ("0011001", 0.8334),
    ("1000010", 0.8317),
]


class TestRankBands:
    def test_reference_pool_frequencies(self):
        pool = [ind(bits, value) for bits, value in TABLE_POOL]
        ranking = rank_bands(pool)
        expected = (13 / 22, 0.0, 16 / 22, 16 / 22, 0.0, 10 / 22, 10 / 22)
        assert ranking.frequencies == pytest.approx(expected, abs=1e-12)
        assert ranking.ranks == (3, None, 1, 1, None, 4, 4)
        assert ranking.pool_size == 22

    def test_single_individual_pool(self):
        ranking = rank_bands([ind("1010000", 0.9)])
        assert ranking.frequencies == (1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0)
        assert ranking.ranks[0] == 1 and ranking.ranks[2] == 1
        assert ranking.ranks[1] is None

    def test_identical_individuals(self):
        pool = [ind("0110000", 0.7)] * 5
        ranking = rank_bands(pool)
        assert set(ranking.frequencies) <= {0.0, 1.0}

    def test_top_k_keeps_boundary_ties(self):
        pool = [
            ind("1000000", 0.9),
            ind("0100000", 0.8),
            ind("0010000", 0.8),
            ind("0001000", 0.7),
        ]
        ranking = rank_bands(pool, top_k=2)
        # the 2nd-best fitness is 0.8; both 0.8 individuals stay
        assert ranking.pool_size == 3

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            rank_bands([])

    def test_pool_final_populations_dedupes_per_run(self):
        cfg = UmdaConfig(population=6, parents=3, generations=4, seed=0)
        a = run(cfg, onemax_oracle_7)
        b = run(UmdaConfig(population=6, parents=3, generations=4, seed=1), onemax_oracle_7)
        pool = pool_final_populations([a, b])
        for result in (a, b):
            genomes = [i.genome for i in result.final_population]
            distinct = set(genomes)
            run_pool = [i for i in pool if i.genome in distinct]
            assert len({i.genome for i in run_pool}) == len(distinct)
