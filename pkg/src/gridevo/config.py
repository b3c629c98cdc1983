"""Flat ``key = value`` run configuration files."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .evolution import ConfigError, EvolutionConfig

__all__ = ["RunConfig", "parse_config", "load_config", "KEYS"]

# key -> (type, default); None default means "unset"
KEYS = {
    "seed": (int, 0),
    "lambda": (int, None),
    "mu": (int, None),
    "islands": (int, None),
    "generations": (int, None),
    "epsilon": (float, None),
    "sigma_floor": (float, 0.01),
    "elite_mode": (str, "persistent"),
    "reasoner": (str, "toy"),
    "task": (str, None),
    "task_set": (str, None),
    "base_genotype": (str, None),
    "checkpoint_every": (int, 0),
    "workers": (int, 1),
    "out_dir": (str, None),
    "remote_endpoint": (str, None),
    "remote_timeout_s": (float, 30.0),
    "remote_retries": (int, 2),
}
REQUIRED = ("lambda", "mu", "islands", "generations", "epsilon")
PATH_KEYS = ("task", "task_set", "base_genotype", "out_dir")


@dataclass(frozen=True)
class RunConfig:
    values: dict

    @property
    def evolution(self) -> EvolutionConfig:
        v = self.values
        return EvolutionConfig(
            population=v["lambda"], mu=v["mu"], islands=v["islands"],
            generations=v["generations"], epsilon=v["epsilon"],
            sigma_floor=v["sigma_floor"], seed=v["seed"],
            elite_mode=v["elite_mode"], workers=v["workers"],
        )

    def __getitem__(self, key):
        return self.values[key]

    def snapshot(self) -> dict:
        """Only the keys that are set, as written back to disk."""
        return {k: v for k, v in sorted(self.values.items()) if v is not None}

    def canonical_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in self.snapshot().items())

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_snapshot(cls, snapshot: dict) -> "RunConfig":
        values = {k: default for k, (_, default) in KEYS.items()}
        for key, value in snapshot.items():
            if key not in KEYS:
                raise ConfigError(key, "unknown configuration key")
            values[key] = value
        cfg = cls(values)
        cfg.validate()
        return cfg

    def validate(self):
        v = self.values
        for key in REQUIRED:
            if v[key] is None:
                raise ConfigError(key, "missing required key")
        if v["reasoner"] not in ("toy", "remote"):
            raise ConfigError("reasoner", f"must be 'toy' or 'remote', got {v['reasoner']!r}")
        if v["reasoner"] == "remote":
            raise ConfigError("reasoner", "remote reasoners have no parameters and cannot be evolved")
        if (v["task"] is None) == (v["task_set"] is None):
            raise ConfigError("task", "set exactly one of 'task' or 'task_set'")
        if v["checkpoint_every"] < 0:
            raise ConfigError("checkpoint_every", "must be non-negative")
        if v["remote_timeout_s"] <= 0:
            raise ConfigError("remote_timeout_s", "must be positive")
        if v["remote_retries"] < 0:
            raise ConfigError("remote_retries", "must be non-negative")
        self.evolution  # runs EvolutionConfig validation


def _convert(key: str, raw: str):
    kind = KEYS[key][0]
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(key, f"cannot read {raw!r} as {kind.__name__}") from None


def parse_config(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Relative paths are resolved against ``base_dir`` when given.
    """
    snapshot = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown configuration key")
        if key in snapshot:
            raise ConfigError(key, "set more than once")
        value = _convert(key, raw)
        if key in PATH_KEYS and base_dir is not None:
            p = Path(value)
            value = str(p if p.is_absolute() else (base_dir / p).resolve())
        snapshot[key] = value
    return RunConfig.from_snapshot(snapshot)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent.resolve())
