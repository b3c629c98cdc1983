"""Island-model evolution strategy over genotypes.

Each generation, every island samples ``population / islands`` offspring
around the current mean, scores them and folds them into a small elite
pool. At the barrier the pooled elites of all islands are averaged into
the next mean. The sampling variance is derived once from the base
genotype and never changes.

Offspring ``i`` of island ``z`` in generation ``g`` always draws from
``offspring_stream(seed, g, z, i)`` and pools are updated in index
order, so results are identical for any number of worker threads.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import Executor, ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .genotype import DEFAULT_SIGMA_FLOOR, Genotype, SamplingDistribution, average, sample
from .scoring import Evaluation, ReasonerFailure
from .streams import offspring_stream

__all__ = [
    "ELITE_MODES",
    "ConfigError",
    "EvolutionConfig",
    "full_scale_config",
    "Elite",
    "IslandState",
    "IslandReport",
    "GenerationRecord",
    "EvolutionState",
    "RunResult",
    "island_step",
    "aggregate",
    "initial_state",
    "step",
    "run",
]

log = logging.getLogger(__name__)

ELITE_MODES = ("persistent", "per_generation")

Scorer = Callable[[Genotype], Union[float, Evaluation]]


class ConfigError(ValueError):
    """Invalid engine configuration. ``key`` names the offending setting."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class EvolutionConfig:
    population: int
    mu: int
    islands: int
    generations: int
    epsilon: float
    sigma_floor: float = DEFAULT_SIGMA_FLOOR
    seed: int = 0
    elite_mode: str = "persistent"
    workers: int = 1  # concurrent evaluators per island

    def __post_init__(self):
        self.validate()

    def validate(self):
        for key in ("population", "mu", "islands", "generations", "workers"):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(key, f"must be a positive integer, got {value!r}")
        if self.population % self.islands:
            raise ConfigError("lambda", f"{self.population} is not divisible by islands={self.islands}")
        if self.mu % self.islands:
            raise ConfigError("mu", f"{self.mu} is not divisible by islands={self.islands}")
        if self.mu > self.population:
            raise ConfigError("mu", f"{self.mu} exceeds lambda={self.population}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon", f"must lie in [0, 1], got {self.epsilon}")
        if not (self.sigma_floor >= 0.0 and math.isfinite(self.sigma_floor)):
            raise ConfigError("sigma_floor", f"must be finite and non-negative, got {self.sigma_floor}")
        if self.elite_mode not in ELITE_MODES:
            raise ConfigError("elite_mode", f"must be one of {ELITE_MODES}, got {self.elite_mode!r}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")

    @property
    def per_island(self) -> int:
        return self.population // self.islands

    @property
    def pool_capacity(self) -> int:
        return self.mu // self.islands


def full_scale_config(epsilon: float, sigma_floor: float = DEFAULT_SIGMA_FLOOR, seed: int = 0) -> EvolutionConfig:
    """Reference run size: 1000 offspring over 4 islands, 4 elites, 12 generations.

    Epsilon was not reported, so the caller picks it.
    """
    return EvolutionConfig(population=1000, mu=4, islands=4, generations=12,
                           epsilon=epsilon, sigma_floor=sigma_floor, seed=seed)


@dataclass
class Elite:
    genotype: Genotype
    score: float
    generation: int
    index: int


@dataclass
class IslandState:
    """Fixed-capacity elite pool, best first; equal scores keep insertion order."""

    island_id: int
    capacity: int
    elites: list[Elite] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("pool capacity must be at least 1")

    @property
    def full(self) -> bool:
        return len(self.elites) >= self.capacity

    def admits(self, score: float) -> bool:
        return not self.full or score > self.elites[-1].score

    def offer(self, elite: Elite) -> bool:
        """Insert ``elite`` if there is room or it strictly beats the worst entry."""
        if not self.admits(elite.score):
            return False
        if self.full:
            self.elites.pop()
        pos = len(self.elites)
        while pos > 0 and self.elites[pos - 1].score < elite.score:
            pos -= 1
        self.elites.insert(pos, elite)
        return True

    def scores(self) -> list[float]:
        return [e.score for e in self.elites]


@dataclass
class IslandReport:
    island_id: int
    scores: list[float]
    failures: int
    best: Optional[Elite]


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_gen: float
    mean_gen: float
    best_ever: float
    evals: int
    failures: int


@dataclass
class EvolutionState:
    """Everything needed to continue a run after ``generation`` completed generations."""

    generation: int
    dist: SamplingDistribution
    islands: list[IslandState]
    best: Optional[Elite] = None
    best_island: int = -1
    history: list[GenerationRecord] = field(default_factory=list)

    @property
    def mean(self) -> Genotype:
        return self.dist.mean

    @property
    def evaluations(self) -> int:
        return self.history[-1].evals if self.history else 0


@dataclass
class RunResult:
    records: list[GenerationRecord]
    best_genotype: Genotype
    best_score: float
    state: EvolutionState


def _score(scorer: Scorer, genotype: Genotype, lock) -> tuple[float, bool]:
    try:
        with lock:
            result = scorer(genotype)
    except ReasonerFailure:
        return 0.0, True
    if isinstance(result, Evaluation):
        value, failed = float(result.score), result.failures > 0
    else:
        value, failed = float(result), False
    if not math.isfinite(value):
        raise ValueError(f"scorer returned a non-finite score {value!r}")
    return value, failed


def island_step(
    state: IslandState,
    dist: SamplingDistribution,
    count: int,
    scorer: Scorer,
    *,
    seed: int,
    generation: int,
    executor: Optional[Executor] = None,
    chunk: int = 1,
    lock=None,
    on_evaluated: Optional[Callable[[int, int, int, float], None]] = None,
) -> tuple[IslandState, IslandReport]:
    """Sample, score and pool ``count`` offspring for one island.

    Offspring are evaluated ``chunk`` at a time (concurrently when an
    executor is given) and folded into the pool strictly in index order.
    Offspring that do not make the pool are dropped right away, so at
    most ``chunk`` candidate genotypes are alive at once.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    lock = lock if lock is not None else nullcontext()
    z = state.island_id

    def evaluate(i: int):
        child = sample(dist, offspring_stream(seed, generation, z, i))
        value, failed = _score(scorer, child, lock)
        return child, value, failed

    scores: list[float] = []
    failures = 0
    best: Optional[Elite] = None
    chunk = max(1, chunk)
    for lo in range(0, count, chunk):
        idx = range(lo, min(lo + chunk, count))
        if executor is None or len(idx) == 1:
            results = [evaluate(i) for i in idx]
        else:
            results = list(executor.map(evaluate, idx))
        for i, (child, value, failed) in zip(idx, results):
            scores.append(value)
            failures += failed
            if on_evaluated is not None:
                on_evaluated(generation, z, i, value)
            elite = Elite(child, value, generation, i)
            if best is None or value > best.score:
                best = elite
            state.offer(elite)
    return state, IslandReport(z, scores, failures, best)


def aggregate(islands: list[IslandState]) -> Genotype:
    """Mean of all pooled elites, island by island, best slot first."""
    pooled = []
    for island in islands:
        if not island.full:
            raise ValueError(
                f"island {island.island_id} holds {len(island.elites)} of {island.capacity} elites"
            )
        pooled.extend(e.genotype for e in island.elites)
    return average(pooled)


def initial_state(config: EvolutionConfig, base: Genotype) -> EvolutionState:
    dist = SamplingDistribution.from_base(base, config.epsilon, config.sigma_floor)
    islands = [IslandState(z, config.pool_capacity) for z in range(config.islands)]
    return EvolutionState(0, dist, islands)


def _check_partition(scorer, base: Genotype):
    expected = getattr(scorer, "partition", None)
    if expected is not None and expected != base.partition:
        raise ValueError("base genotype does not match the reasoner's parameter layout")


def step(
    state: EvolutionState,
    config: EvolutionConfig,
    scorer: Scorer,
    *,
    island_pool: Optional[Executor] = None,
    eval_pool: Optional[Executor] = None,
    on_evaluated=None,
) -> GenerationRecord:
    """Run one generation in place and return its log record."""
    g = state.generation + 1
    if config.elite_mode == "per_generation":
        for island in state.islands:
            island.elites.clear()
    lock = None if getattr(scorer, "concurrency_safe", True) else threading.Lock()

    def work(island: IslandState):
        return island_step(
            island, state.dist, config.per_island, scorer,
            seed=config.seed, generation=g, executor=eval_pool,
            chunk=config.workers, lock=lock, on_evaluated=on_evaluated,
        )[1]

    if island_pool is None:
        reports = [work(isl) for isl in state.islands]
    else:
        reports = list(island_pool.map(work, state.islands))

    # barrier: reports are in island order whatever finished first
    all_scores = [s for r in reports for s in r.scores]
    gen_best_island, gen_best = -1, None
    for r in reports:
        if r.best is not None and (gen_best is None or r.best.score > gen_best.score):
            gen_best_island, gen_best = r.island_id, r.best
    if gen_best is not None and (state.best is None or gen_best.score > state.best.score):
        state.best, state.best_island = gen_best, gen_best_island

    state.dist = state.dist.with_mean(aggregate(state.islands))
    state.generation = g
    record = GenerationRecord(
        generation=g,
        best_gen=gen_best.score,
        mean_gen=math.fsum(all_scores) / len(all_scores),
        best_ever=state.best.score,
        evals=state.evaluations + len(all_scores),
        failures=sum(r.failures for r in reports),
    )
    state.history.append(record)
    return record


def run(
    config: EvolutionConfig,
    base: Genotype,
    scorer: Scorer,
    *,
    state: Optional[EvolutionState] = None,
    on_generation: Optional[Callable[[EvolutionState, GenerationRecord], None]] = None,
    on_evaluated: Optional[Callable[[int, int, int, float], None]] = None,
) -> RunResult:
    """Evolve ``base`` for ``config.generations`` generations.

    Pass ``state`` (e.g. from a checkpoint) to continue an interrupted
    run; ``base`` is then only used for the layout check.
    ``on_generation`` runs at every barrier, after the mean update.
    """
    _check_partition(scorer, base)
    if state is None:
        state = initial_state(config, base)
    elif state.mean.partition != base.partition:
        raise ValueError("resumed state does not match the base genotype's layout")

    parallel_islands = config.islands > 1
    island_pool = ThreadPoolExecutor(config.islands, thread_name_prefix="island") if parallel_islands else None
    eval_pool = (
        ThreadPoolExecutor(config.islands * config.workers, thread_name_prefix="eval")
        if config.workers > 1 else None
    )
    try:
        while state.generation < config.generations:
            record = step(state, config, scorer, island_pool=island_pool,
                          eval_pool=eval_pool, on_evaluated=on_evaluated)
            log.info("generation %d: best %.4f mean %.4f best-ever %.4f",
                     record.generation, record.best_gen, record.mean_gen, record.best_ever)
            if on_generation is not None:
                on_generation(state, record)
    finally:
        for pool in (island_pool, eval_pool):
            if pool is not None:
                pool.shutdown()

    if state.best is None:
        raise ValueError("run finished without evaluating any offspring")
    return RunResult(list(state.history), state.best.genotype, state.best.score, state)
