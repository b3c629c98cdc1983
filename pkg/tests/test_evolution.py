import itertools
import threading

import numpy as np
import pytest

from gridevo.evolution import (
    ConfigError,
    Elite,
    EvolutionConfig,
    IslandState,
    aggregate,
    island_step,
    full_scale_config,
    run,
)
from gridevo.genotype import Genotype, LayerPartition, SamplingDistribution, derive_variance, sample
from gridevo.scoring import Evaluation, ReasonerFailure
from gridevo.streams import offspring_stream

PART = LayerPartition.from_lengths([("a", 3), ("b", 2)])


def _dist(eps=0.5, floor=0.1):
    base = Genotype([0.5, -1.0, 2.0, 0.0, 0.3], PART)
    return SamplingDistribution.from_base(base, eps, floor)


def scripted(scores):
    it = iter(scores)
    return lambda g: next(it)


def quadratic(target):
    target = np.asarray(target, dtype=float)
    return lambda g: 1.0 / (1.0 + float(np.sum((g.values - target) ** 2)))


class TestConfig:
    def test_valid(self):
        cfg = EvolutionConfig(population=16, mu=8, islands=4, generations=3, epsilon=0.1)
        assert (cfg.per_island, cfg.pool_capacity) == (4, 2)

    @pytest.mark.parametrize("kwargs, key", [
        (dict(population=10), "lambda"),
        (dict(mu=6), "mu"),
        (dict(mu=2), "mu"),  # floor(mu / Z) == 0
        (dict(mu=20), "mu"),
        (dict(epsilon=1.5), "epsilon"),
        (dict(sigma_floor=-1.0), "sigma_floor"),
        (dict(elite_mode="comma"), "elite_mode"),
        (dict(generations=0), "generations"),
        (dict(workers=0), "workers"),
    ])
    def test_invalid(self, kwargs, key):
        args = dict(population=16, mu=8, islands=4, generations=3, epsilon=0.1)
        args.update(kwargs)
        with pytest.raises(ConfigError) as info:
            EvolutionConfig(**args)
        assert info.value.key == key

    def test_full_scale_preset(self):
        cfg = full_scale_config(epsilon=0.01)
        assert (cfg.population, cfg.islands, cfg.mu, cfg.generations) == (1000, 4, 4, 12)
        assert cfg.per_island == 250 and cfg.pool_capacity == 1


class TestIslandPool:
    def _elite(self, score, i=0):
        return Elite(Genotype.zeros(PART), score, 1, i)

    def test_sorted_with_stable_ties(self):
        pool = IslandState(0, 3)
        for i, s in enumerate([0.5, 0.7, 0.5, 0.9]):
            pool.offer(self._elite(s, i))
        assert [(e.score, e.index) for e in pool.elites] == [(0.9, 3), (0.7, 1), (0.5, 0)]

    def test_equal_score_does_not_replace(self):
        pool = IslandState(0, 1, [self._elite(0.9, 0)])
        assert not pool.offer(self._elite(0.9, 1))
        assert pool.elites[0].index == 0


class TestIslandStep:
    def test_keeps_best_of_three(self):
        state, report = island_step(IslandState(0, 1), _dist(), 3, scripted([0.2, 0.7, 0.5]),
                                    seed=1, generation=1)
        assert state.scores() == [0.7]
        assert state.elites[0].index == 1
        assert report.scores == [0.2, 0.7, 0.5]
        # the kept genotype is exactly offspring 1 of this island
        expected = sample(_dist(), offspring_stream(1, 1, 0, 1))
        assert state.elites[0].genotype.identical(expected)

    def test_no_improvement_leaves_pool(self):
        incumbent = Elite(Genotype.zeros(PART), 0.9, 1, 0)
        state, _ = island_step(IslandState(0, 1, [incumbent]), _dist(), 3, scripted([0.1, 0.9, 0.3]),
                               seed=1, generation=2)
        assert state.elites == [incumbent]

    def test_failures_score_zero_and_are_counted(self):
        def flaky(g, calls=itertools.count()):
            n = next(calls)
            if n == 0:
                raise ReasonerFailure("timeout")
            if n == 1:
                return Evaluation(0.4, 2)
            return 0.6

        _, report = island_step(IslandState(0, 2), _dist(), 3, flaky, seed=0, generation=1)
        assert report.scores == [0.0, 0.4, 0.6]
        assert report.failures == 2

    def test_rejects_non_finite_scores(self):
        with pytest.raises(ValueError):
            island_step(IslandState(0, 1), _dist(), 1, lambda g: float("nan"), seed=0, generation=1)


class TestAggregate:
    def test_mean_of_elites(self):
        p = LayerPartition.single(2)
        islands = [IslandState(0, 1, [Elite(Genotype([0, 2], p), 1.0, 1, 0)]),
                   IslandState(1, 1, [Elite(Genotype([2, 0], p), 1.0, 1, 0)])]
        assert aggregate(islands).values.tolist() == [1.0, 1.0]

    def test_identical_elites(self):
        g = Genotype([0.1, 0.2, 0.3, -0.7, 1e-9], PART)
        islands = [IslandState(z, 2, [Elite(g, 0.5, 1, 0), Elite(g, 0.4, 1, 1)]) for z in range(3)]
        assert aggregate(islands).identical(g)

    def test_under_capacity(self):
        with pytest.raises(ValueError):
            aggregate([IslandState(0, 2, [Elite(Genotype.zeros(PART), 0.5, 1, 0)])])


class TestRun:
    def test_single_generation_averages_island_bests(self):
        cfg = EvolutionConfig(population=8, mu=4, islands=4, generations=1, epsilon=0.5, seed=5)
        scorer = quadratic([1, 1, 1, 1, 1])
        base = _dist().mean
        result = run(cfg, base, scorer)
        dist = SamplingDistribution.from_base(base, 0.5, cfg.sigma_floor)
        bests = []
        for z in range(4):
            kids = [sample(dist, offspring_stream(5, 1, z, i)) for i in range(2)]
            bests.append(max(kids, key=scorer))
        expected = sum(k.values for k in bests) / 4
        np.testing.assert_allclose(result.state.mean.values, expected, rtol=1e-15, atol=1e-15)

    def test_degenerate_run_stays_at_base(self):
        base = Genotype([0.1, 0.2, 0.3, 0.4, 0.5], PART)
        scorer = quadratic(np.zeros(5))
        cfg = EvolutionConfig(population=8, mu=4, islands=2, generations=4, epsilon=0.0,
                              sigma_floor=0.0, seed=0)
        result = run(cfg, base, scorer)
        assert result.state.mean.identical(base)
        assert result.best_score == scorer(base)
        assert all(r.best_ever == scorer(base) for r in result.records)

    def test_sigma_constant(self):
        base = Genotype([0.5, -1.0, 2.0, 0.0, 0.3], PART)
        before = derive_variance(base, 0.3, 0.05)
        cfg = EvolutionConfig(population=8, mu=4, islands=2, generations=5, epsilon=0.3,
                              sigma_floor=0.05, seed=9)
        result = run(cfg, base, quadratic(np.ones(5)))
        assert result.state.dist.variance.tobytes() == before.tobytes()

    def test_partition_mismatch(self):
        class Scorer:
            partition = LayerPartition.single(5)

            def __call__(self, g):
                return 0.0

        cfg = EvolutionConfig(population=4, mu=2, islands=2, generations=1, epsilon=0.1)
        with pytest.raises(ValueError, match="layout"):
            run(cfg, Genotype.zeros(PART), Scorer())

    def test_per_generation_mode_forgets_old_elites(self):
        scores = iter([0.9, 0.1] + [0.2, 0.3] * 10)
        cfg = EvolutionConfig(population=2, mu=1, islands=1, generations=3, epsilon=0.2,
                              elite_mode="per_generation")
        result = run(cfg, Genotype.zeros(PART), lambda g: next(scores))
        assert result.state.islands[0].scores() == [0.3]
        assert result.best_score == 0.9
        assert [r.best_ever for r in result.records] == [0.9, 0.9, 0.9]

    def test_unsafe_scorer_is_serialized(self):
        active = []
        overlap = []
        lock = threading.Lock()

        class Unsafe:
            concurrency_safe = False

            def __call__(self, g):
                with lock:
                    active.append(1)
                    overlap.append(len(active))
                threading.Event().wait(0.001)
                with lock:
                    active.pop()
                return float(g.values[0])

        cfg = EvolutionConfig(population=16, mu=4, islands=4, generations=2, epsilon=0.5, workers=4)
        run(cfg, _dist().mean, Unsafe())
        assert max(overlap) == 1

    def test_thread_count_does_not_change_results(self):
        base = _dist().mean
        outputs = []
        for workers in (1, 3, 4):
            cfg = EvolutionConfig(population=12, mu=4, islands=2, generations=6, epsilon=0.4,
                                  seed=11, workers=workers)
            r = run(cfg, base, quadratic([1, 0, 1, 0, 1]))
            outputs.append((r.records, r.best_genotype.values.tobytes(), r.state.mean.values.tobytes()))
        assert outputs[0] == outputs[1] == outputs[2]

    def test_seed_matters(self):
        base = _dist().mean
        runs = [run(EvolutionConfig(population=8, mu=2, islands=2, generations=2, epsilon=0.4, seed=s),
                    base, quadratic(np.ones(5))).state.mean for s in (1, 2)]
        assert not runs[0].identical(runs[1])

    def test_negative_seed_accepted(self):
        cfg = EvolutionConfig(population=4, mu=2, islands=2, generations=1, epsilon=0.4, seed=-3)
        run(cfg, _dist().mean, quadratic(np.ones(5)))
