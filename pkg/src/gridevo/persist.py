"""On-disk formats: float64 sidecar arrays, genotype files, checkpoints, run manifests.

Arrays are raw little-endian IEEE-754 doubles. Each is referenced from a
JSON document by ``{"file", "length", "sha256"}`` so that truncation or
corruption is caught on read.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .evolution import Elite, EvolutionState, GenerationRecord, IslandState
from .genotype import Genotype, LayerPartition, SamplingDistribution

__all__ = [
    "ENGINE_VERSION",
    "IntegrityError",
    "write_array",
    "read_array",
    "save_genotype",
    "load_genotype",
    "RunManifest",
    "write_manifest",
    "read_manifest",
    "Checkpoint",
    "write_checkpoint",
    "read_checkpoint",
]

ENGINE_VERSION = f"gridevo/{__version__}"
GENOTYPE_FORMAT = "gridevo-genotype/1"
CHECKPOINT_FORMAT = "gridevo-checkpoint/1"
_LE_F64 = np.dtype("<f8")


class IntegrityError(ValueError):
    pass


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _write_text(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_array(directory: Path, name: str, values: np.ndarray) -> dict:
    data = np.ascontiguousarray(values, dtype=_LE_F64).tobytes()
    path = Path(directory) / name
    tmp = path.with_name(name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return {"file": name, "length": len(values), "sha256": hashlib.sha256(data).hexdigest()}


def read_array(directory: Path, ref: dict) -> np.ndarray:
    try:
        path = Path(directory) / ref["file"]
        length = int(ref["length"])
        digest = ref["sha256"]
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"malformed array reference {ref!r}") from exc
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IntegrityError(f"cannot read array file {path}: {exc}") from exc
    if len(data) != 8 * length:
        raise IntegrityError(f"{path}: expected {8 * length} bytes, found {len(data)}")
    if hashlib.sha256(data).hexdigest() != digest:
        raise IntegrityError(f"{path}: content hash mismatch")
    return np.frombuffer(data, dtype=_LE_F64).astype(np.float64)


def _load_json(path: Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"{path}: corrupted document ({exc})") from exc
    if not isinstance(doc, dict):
        raise IntegrityError(f"{path}: expected a JSON object")
    return doc


def save_genotype(path: str | Path, genotype: Genotype, score: Optional[float] = None):
    """Write ``path`` (JSON) plus ``<path>.f64`` holding the values."""
    path = Path(path)
    ref = write_array(path.parent, path.name + ".f64", genotype.values)
    doc = {"format": GENOTYPE_FORMAT, "layers": genotype.partition.to_list(), "values": ref}
    if score is not None:
        doc["score"] = score
    _write_text(path, _dump(doc))


def load_genotype(path: str | Path) -> Genotype:
    path = Path(path)
    doc = _load_json(path)
    if doc.get("format") != GENOTYPE_FORMAT:
        raise IntegrityError(f"{path}: not a genotype file")
    partition = LayerPartition.from_list(doc["layers"])
    return Genotype(read_array(path.parent, doc["values"]), partition)


@dataclass(frozen=True)
class RunManifest:
    config: dict
    config_hash: str
    engine: str
    created: str
    curve: str = "curve.csv"
    checkpoints: str = "checkpoints"
    best: str = "best.genotype"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def new_manifest(config) -> RunManifest:
    return RunManifest(
        config=config.snapshot(),
        config_hash=config.content_hash(),
        engine=ENGINE_VERSION,
        created=datetime.now(timezone.utc).replace(microsecond=0).isoformat(),
    )


def write_manifest(path: str | Path, manifest: RunManifest):
    _write_text(Path(path), _dump(manifest.to_dict()))


def read_manifest(path: str | Path) -> RunManifest:
    from .config import RunConfig

    doc = _load_json(Path(path))
    try:
        manifest = RunManifest(**doc)
    except TypeError as exc:
        raise IntegrityError(f"{path}: malformed run manifest") from exc
    if RunConfig.from_snapshot(manifest.config).content_hash() != manifest.config_hash:
        raise IntegrityError(f"{path}: config hash does not match the config snapshot")
    return manifest


@dataclass
class Checkpoint:
    manifest: str  # path of run.json, relative to the checkpoint directory
    config_hash: str
    state: EvolutionState


def _elite_doc(directory: Path, name: str, elite: Elite) -> dict:
    return {
        "score": elite.score,
        "generation": elite.generation,
        "index": elite.index,
        "values": write_array(directory, name, elite.genotype.values),
    }


def _elite_from(directory: Path, doc: dict, partition: LayerPartition) -> Elite:
    return Elite(Genotype(read_array(directory, doc["values"]), partition),
                 float(doc["score"]), int(doc["generation"]), int(doc["index"]))


def write_checkpoint(directory: str | Path, checkpoint: Checkpoint) -> Path:
    """Write ``checkpoint.json`` and its arrays into ``directory``; returns the JSON path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    st = checkpoint.state
    dist = st.dist
    islands = []
    for isl in st.islands:
        islands.append({
            "island": isl.island_id,
            "capacity": isl.capacity,
            "elites": [_elite_doc(directory, f"island{isl.island_id}-slot{k}.f64", e)
                       for k, e in enumerate(isl.elites)],
        })
    doc = {
        "format": CHECKPOINT_FORMAT,
        "engine": ENGINE_VERSION,
        "manifest": checkpoint.manifest,
        "config_hash": checkpoint.config_hash,
        "generation": st.generation,
        # offspring streams are keyed by (seed, generation, island, index),
        # so the next generation index is the only counter to restore
        "stream_counters": {"next_generation": st.generation + 1},
        "layers": dist.mean.partition.to_list(),
        "epsilon": dist.epsilon,
        "sigma_floor": dist.sigma_floor,
        "mean": write_array(directory, "mean.f64", dist.mean.values),
        "variance": write_array(directory, "variance.f64", dist.variance),
        "islands": islands,
        "best": None if st.best is None else {
            "island": st.best_island, **_elite_doc(directory, "best.f64", st.best)},
        "history": [[r.generation, r.best_gen, r.mean_gen, r.best_ever, r.evals, r.failures]
                    for r in st.history],
    }
    path = directory / "checkpoint.json"
    _write_text(path, _dump(doc))
    return path


def read_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if path.is_dir():
        path = path / "checkpoint.json"
    directory = path.parent
    try:
        doc = _load_json(path)
    except OSError as exc:
        raise IntegrityError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise IntegrityError(f"{path}: not a checkpoint")
    if doc.get("engine") != ENGINE_VERSION:
        raise IntegrityError(
            f"{path}: written by {doc.get('engine')!r}, this engine is {ENGINE_VERSION!r}")
    try:
        partition = LayerPartition.from_list(doc["layers"])
        mean = Genotype(read_array(directory, doc["mean"]), partition)
        dist = SamplingDistribution(mean, read_array(directory, doc["variance"]),
                                    float(doc["epsilon"]), float(doc["sigma_floor"]))
        islands = [
            IslandState(int(i["island"]), int(i["capacity"]),
                        [_elite_from(directory, e, partition) for e in i["elites"]])
            for i in doc["islands"]
        ]
        best_doc = doc["best"]
        best = None if best_doc is None else _elite_from(directory, best_doc, partition)
        history = [GenerationRecord(int(g), float(a), float(b), float(c), int(e), int(f))
                   for g, a, b, c, e, f in doc["history"]]
        state = EvolutionState(int(doc["generation"]), dist, islands, best,
                               -1 if best_doc is None else int(best_doc["island"]), history)
        return Checkpoint(doc["manifest"], doc["config_hash"], state)
    except IntegrityError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: malformed checkpoint ({exc})") from exc
