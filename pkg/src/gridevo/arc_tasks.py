"""ARC-format task loading and grid serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

__all__ = [
    "TaskFormatError",
    "Grid",
    "ArcTask",
    "parse_task",
    "load_task",
    "load_task_set",
    "serialize_grid",
]

ROW_SEPARATOR = "|"


class TaskFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    height: int
    width: int
    cells: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise TaskFormatError("grid dimensions must be positive")
        if len(self.cells) != self.height * self.width:
            raise TaskFormatError("cell count does not match grid dimensions")
        for c in self.cells:
            if not (isinstance(c, int) and not isinstance(c, bool)) or not 0 <= c <= 9:
                raise TaskFormatError(f"color out of range: {c!r}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "Grid":
        if not isinstance(rows, (list, tuple)) or len(rows) == 0:
            raise TaskFormatError("grid must be a non-empty list of rows")
        width = None
        cells = []
        for row in rows:
            if not isinstance(row, (list, tuple)) or len(row) == 0:
                raise TaskFormatError("grid rows must be non-empty lists")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise TaskFormatError("ragged grid")
            cells.extend(row)
        return cls(len(rows), width, tuple(cells))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def rows(self) -> list[list[int]]:
        w = self.width
        return [list(self.cells[r * w:(r + 1) * w]) for r in range(self.height)]


@dataclass(frozen=True)
class ArcTask:
    id: str
    train: tuple[tuple[Grid, Grid], ...]
    test: tuple[tuple[Grid, Grid], ...]

    def __post_init__(self):
        if not self.train:
            raise TaskFormatError("task has an empty train list")
        if not self.test:
            raise TaskFormatError("task has an empty test list")


def _pairs(raw, section: str, task_id: str) -> tuple[tuple[Grid, Grid], ...]:
    if not isinstance(raw, list):
        raise TaskFormatError(f"task {task_id!r}: {section!r} must be a list")
    pairs = []
    for n, item in enumerate(raw):
        if not isinstance(item, dict) or "input" not in item:
            raise TaskFormatError(f"task {task_id!r}: {section}[{n}] lacks an input grid")
        if "output" not in item:
            # evaluation splits ship tests without answers; we cannot score those
            raise TaskFormatError(f"task {task_id!r}: {section}[{n}] has no ground-truth output")
        pairs.append((Grid.from_rows(item["input"]), Grid.from_rows(item["output"])))
    return tuple(pairs)


def parse_task(document: str, task_id: str | None = None) -> ArcTask:
    """Parse one ARC-1 task document.

    ``task_id`` is used when the document carries no ``"id"`` field.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TaskFormatError(f"malformed task document: {exc}") from exc
    if not isinstance(data, dict):
        raise TaskFormatError("malformed task document: top level must be an object")
    tid = str(data.get("id", task_id if task_id is not None else "task"))
    if "train" not in data or "test" not in data:
        raise TaskFormatError(f"task {tid!r}: missing 'train' or 'test'")
    return ArcTask(tid, _pairs(data["train"], "train", tid), _pairs(data["test"], "test", tid))


def load_task(path: str | Path) -> ArcTask:
    path = Path(path)
    return parse_task(path.read_text(encoding="utf-8"), task_id=path.stem)


def load_task_set(manifest: str | Path) -> list[ArcTask]:
    """Load every task listed in a manifest (one path per line, ``#`` comments).

    Relative paths resolve against the manifest's directory.
    """
    manifest = Path(manifest)
    root = manifest.parent
    tasks = []
    for line in manifest.read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip()
        if not entry:
            continue
        p = Path(entry)
        tasks.append(load_task(p if p.is_absolute() else root / p))
    if not tasks:
        raise TaskFormatError(f"task set {str(manifest)!r} lists no tasks")
    return tasks


def serialize_grid(g: Grid) -> str:
    """One digit per cell, rows joined by ``|``: ``[[1,0],[0,1]] -> "10|01"``."""
    return ROW_SEPARATOR.join("".join(str(c) for c in row) for row in g.rows())
