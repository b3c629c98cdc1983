"""Command line entry point: ``gridevo run|resume|score|report``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Progress goes to stderr; results go to files (or stdout for ``score``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .arc_tasks import TaskFormatError, load_task, load_task_set
from .config import RunConfig, load_config
from .evolution import ConfigError, EvolutionState, run
from .genotype import Genotype
from .persist import (
    Checkpoint,
    IntegrityError,
    new_manifest,
    read_checkpoint,
    read_manifest,
    save_genotype,
    load_genotype,
    write_checkpoint,
    write_manifest,
)
from .reasoner import RemoteReasoner, RemoteReasonerSpec, ToyReasoner, infer_toy_spec
from .report import LogFormatError, format_curve, read_curve, render_svg
from .scoring import ReasonerFailure, TaskScorer, evaluate_detailed

log = logging.getLogger("gridevo")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_tasks(config: RunConfig):
    try:
        if config["task"] is not None:
            return [load_task(config["task"])]
        return load_task_set(config["task_set"])
    except OSError as exc:
        raise UsageError(f"cannot read task file: {exc}") from exc
    except TaskFormatError as exc:
        raise UsageError(f"invalid task: {exc}") from exc


def _build(config: RunConfig):
    tasks = _load_tasks(config)
    try:
        spec = infer_toy_spec(tasks)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    scorer = TaskScorer(ToyReasoner(spec), tasks)
    if config["base_genotype"] is not None:
        try:
            base = load_genotype(config["base_genotype"])
        except (OSError, IntegrityError) as exc:
            raise UsageError(f"base_genotype: {exc}") from exc
        if base.partition != scorer.partition:
            raise UsageError("base_genotype: layout does not match the toy reasoner for this task")
    else:
        base = Genotype.zeros(scorer.partition)
    return scorer, base


def _execute(config: RunConfig, out: Path, manifest_name: str, state: Optional[EvolutionState]):
    scorer, base = _build(config)
    evo = config.evolution
    every = config["checkpoint_every"]
    curve_path = out / "curve.csv"
    ckpt_root = out / "checkpoints"
    config_hash = config.content_hash()

    def checkpoint(st: EvolutionState):
        directory = ckpt_root / f"gen-{st.generation:04d}"
        rel = Path("..", "..", manifest_name).as_posix()
        write_checkpoint(directory, Checkpoint(rel, config_hash, st))
        log.info("checkpoint written to %s", directory)

    def on_generation(st: EvolutionState, record):
        curve_path.write_text(format_curve(st.history), encoding="utf-8")
        print(f"generation {record.generation}/{evo.generations}: best {record.best_gen:.4f} "
              f"mean {record.mean_gen:.4f} best-ever {record.best_ever:.4f}", file=sys.stderr)
        if every and (st.generation % every == 0 or st.generation == evo.generations):
            checkpoint(st)

    if state is not None:
        # drop log rows written after the checkpoint was taken
        curve_path.write_text(format_curve(state.history), encoding="utf-8")
    result = run(evo, base, scorer, state=state, on_generation=on_generation)
    save_genotype(out / "best.genotype", result.best_genotype, result.best_score)
    print(f"best score {result.best_score:.4f}; results in {out}", file=sys.stderr)


def cmd_run(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    config = load_config(path)
    out = args.out or config["out_dir"]
    if out is None:
        raise UsageError("out_dir: no output directory (pass --out or set out_dir)")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = new_manifest(config)
    write_manifest(out / "run.json", manifest)
    _execute(config, out, "run.json", None)
    return EXIT_OK


def cmd_resume(args) -> int:
    path = Path(args.checkpoint)
    if path.is_dir():
        path = path / "checkpoint.json"
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    ckpt = read_checkpoint(path)
    manifest_path = (path.parent / ckpt.manifest).resolve()
    manifest = read_manifest(manifest_path)
    if manifest.config_hash != ckpt.config_hash:
        raise IntegrityError("checkpoint belongs to a different run configuration")
    config = RunConfig.from_snapshot(manifest.config)
    if ckpt.state.generation >= config["generations"]:
        print(f"run already complete ({ckpt.state.generation} of {config['generations']} "
              f"generations); nothing to do", file=sys.stderr)
        return EXIT_OK
    _execute(config, manifest_path.parent, manifest_path.name, ckpt.state)
    return EXIT_OK


class _KindRecorder:
    """Wraps a reasoner and remembers the kind of every failure."""

    def __init__(self, inner):
        self.inner = inner
        self.concurrency_safe = inner.concurrency_safe
        self.kinds: list[str] = []

    def predict(self, genotype, task, test_input):
        try:
            return self.inner.predict(genotype, task, test_input)
        except ReasonerFailure as exc:
            self.kinds.append(exc.kind)
            raise


def cmd_score(args) -> int:
    try:
        task = load_task(args.task)
    except OSError as exc:
        raise UsageError(f"cannot read task file: {exc}") from exc
    except TaskFormatError as exc:
        raise UsageError(f"invalid task: {exc}") from exc
    if args.remote:
        reasoner = _KindRecorder(RemoteReasoner(RemoteReasonerSpec(
            args.remote, timeout=args.timeout, max_retries=args.retries)))
        genotype = None
    else:
        try:
            spec = infer_toy_spec(task)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        try:
            genotype = load_genotype(args.genotype)
        except OSError as exc:
            raise UsageError(f"cannot read genotype: {exc}") from exc
        if genotype.partition != spec.param_layout:
            raise UsageError("genotype layout does not match the toy reasoner for this task")
        reasoner = _KindRecorder(ToyReasoner(spec))
    result = evaluate_detailed(reasoner, genotype, task)
    for kind in reasoner.kinds:
        print(f"reasoner failure: {kind}", file=sys.stderr)
    print(f"{result.score:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    records = read_curve(args.log)
    Path(args.out).write_text(render_svg(records), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridevo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an evolution from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a run from a checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint.json or its directory")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("score", help="score a genotype or remote model on one task")
    p.add_argument("--task", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--genotype")
    source.add_argument("--remote", metavar="URL")
    p.add_argument("--timeout", type=float, default=30.0, help="remote timeout in seconds")
    p.add_argument("--retries", type=int, default=2, help="remote transport retries")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="render curve.csv as an SVG chart")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"gridevo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrityError, LogFormatError, OSError, ValueError) as exc:
        print(f"gridevo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
