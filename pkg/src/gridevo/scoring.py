"""Edit-distance scoring of predicted answers against ARC ground truth."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, NamedTuple, Optional, Protocol, Sequence, runtime_checkable

from .arc_tasks import ArcTask, Grid, serialize_grid

if TYPE_CHECKING:
    from .genotype import Genotype, LayerPartition

__all__ = [
    "ReasonerFailure",
    "Reasoner",
    "Evaluation",
    "levenshtein",
    "score",
    "evaluate",
    "evaluate_detailed",
    "meta_score",
    "TaskScorer",
]


class ReasonerFailure(Exception):
    """A reasoner could not produce an answer. ``kind`` names the cause."""

    def __init__(self, kind: str, message: str = ""):
        super().__init__(f"{kind}: {message}" if message else kind)
        self.kind = kind


@runtime_checkable
class Reasoner(Protocol):
    """Anything that turns (genotype, task, test input) into an answer string.

    ``concurrency_safe`` tells the engine whether ``predict`` may be
    called from several threads at once.
    """

    concurrency_safe: bool

    def predict(self, genotype: Optional["Genotype"], task: ArcTask, test_input: Grid) -> str:
        ...


class Evaluation(NamedTuple):
    score: float
    failures: int


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    # b is the shorter string; one row of len(b)+1 cells
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def score(predicted: str, truth: str) -> float:
    """``1 - lev / max(len)``; two empty strings count as a perfect match."""
    longest = max(len(predicted), len(truth))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(predicted, truth) / longest


def evaluate_detailed(reasoner: Reasoner, genotype: Optional["Genotype"], task: ArcTask) -> Evaluation:
    """Mean score over the task's test pairs plus the number of failed pairs."""
    values = []
    failures = 0
    for test_input, truth in task.test:
        try:
            predicted = reasoner.predict(genotype, task, test_input)
        except ReasonerFailure:
            failures += 1
            values.append(0.0)
            continue
        values.append(score(predicted, serialize_grid(truth)))
    return Evaluation(math.fsum(values) / len(values), failures)


def evaluate(reasoner: Reasoner, genotype: Optional["Genotype"], task: ArcTask) -> float:
    return evaluate_detailed(reasoner, genotype, task).score


def _meta(reasoner, genotype, tasks) -> Evaluation:
    if len(tasks) == 0:
        raise ValueError("meta_score needs at least one task")
    results = [evaluate_detailed(reasoner, genotype, t) for t in tasks]
    # fsum is exact, so the result does not depend on task order
    return Evaluation(
        math.fsum(r.score for r in results) / len(results),
        sum(r.failures for r in results),
    )


def meta_score(reasoner: Reasoner, genotype: Optional["Genotype"], tasks: Sequence[ArcTask]) -> float:
    """Uniform average of :func:`evaluate` over a finite task set."""
    return _meta(reasoner, genotype, tasks).score


class TaskScorer:
    """Callable genotype -> :class:`Evaluation` over a fixed task set.

    This is the fitness function handed to the evolution engine.
    """

    def __init__(self, reasoner: Reasoner, tasks: Sequence[ArcTask],
                 partition: Optional["LayerPartition"] = None):
        if len(tasks) == 0:
            raise ValueError("TaskScorer needs at least one task")
        self.reasoner = reasoner
        self.tasks = list(tasks)
        self.partition = partition if partition is not None else getattr(reasoner, "partition", None)
        self.concurrency_safe = bool(getattr(reasoner, "concurrency_safe", False))

    def __call__(self, genotype: Optional["Genotype"]) -> Evaluation:
        return _meta(self.reasoner, genotype, self.tasks)
