"""Reasoners: a built-in evolvable toy model and a remote HTTP client.

The toy model is a per-cell affine classifier. The input grid is
one-hot encoded over the 10 colors (index ``cell * 10 + color``,
row-major), multiplied by a ``weights`` matrix and shifted by ``bias``;
each output cell takes the argmax of its 10 logits. Its parameters live
in a two-layer genotype so the layer-wise variance rule has something
to distinguish.
"""

from __future__ import annotations

import json
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .arc_tasks import ArcTask, Grid, serialize_grid
from .genotype import Genotype, LayerPartition
from .scoring import ReasonerFailure

__all__ = [
    "NUM_COLORS",
    "ToyReasonerSpec",
    "ToyReasoner",
    "toy_forward",
    "infer_toy_spec",
    "identity_wiring",
    "DEFAULT_PROMPT_TEMPLATE",
    "RemoteReasonerSpec",
    "RemoteReasoner",
    "render_prompt",
    "remote_predict",
]

NUM_COLORS = 10


@dataclass(frozen=True)
class ToyReasonerSpec:
    in_height: int
    in_width: int
    out_height: int
    out_width: int

    def __post_init__(self):
        for name in ("in_height", "in_width", "out_height", "out_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def in_features(self) -> int:
        return self.in_height * self.in_width * NUM_COLORS

    @property
    def out_features(self) -> int:
        return self.out_height * self.out_width * NUM_COLORS

    @property
    def param_layout(self) -> LayerPartition:
        return LayerPartition.from_lengths([
            ("weights", self.out_features * self.in_features),
            ("bias", self.out_features),
        ])

    def split(self, genotype: Genotype) -> tuple[np.ndarray, np.ndarray]:
        """View the genotype as ``(weights[out, in], bias[out])``."""
        if genotype.partition != self.param_layout:
            raise ValueError("genotype does not match the toy reasoner's parameter layout")
        n_w = self.out_features * self.in_features
        w = genotype.values[:n_w].reshape(self.out_features, self.in_features)
        return w, genotype.values[n_w:]


def toy_forward(spec: ToyReasonerSpec, genotype: Genotype, grid: Grid) -> Grid:
    if grid.shape != (spec.in_height, spec.in_width):
        raise ValueError(
            f"input grid is {grid.height}x{grid.width}, reasoner expects "
            f"{spec.in_height}x{spec.in_width}"
        )
    weights, bias = spec.split(genotype)
    hot = np.arange(len(grid.cells)) * NUM_COLORS + np.asarray(grid.cells)
    # W @ onehot == sum of the hot columns
    logits = weights[:, hot].sum(axis=1) + bias
    # np.argmax returns the first maximum, i.e. the lowest color on ties
    colors = np.argmax(logits.reshape(-1, NUM_COLORS), axis=1)
    return Grid(spec.out_height, spec.out_width, tuple(int(c) for c in colors))


def _shape_of(grids: Iterable[Grid]) -> Optional[tuple[int, int]]:
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        return None
    return shapes.pop()


def infer_toy_spec(tasks: Union[ArcTask, Sequence[ArcTask]]) -> ToyReasonerSpec:
    """Derive input/output shapes shared by every pair of one or more tasks."""
    if isinstance(tasks, ArcTask):
        tasks = [tasks]
    pairs = [p for t in tasks for p in (*t.train, *t.test)]
    in_shape = _shape_of(i for i, _ in pairs)
    out_shape = _shape_of(o for _, o in pairs)
    if in_shape is None or out_shape is None:
        raise ValueError("shape-varying task unsupported by toy reasoner")
    return ToyReasonerSpec(*in_shape, *out_shape)


def identity_wiring(spec: ToyReasonerSpec, strength: float = 1.0) -> Genotype:
    """Genotype that copies input cell c's color to output cell c."""
    if (spec.in_height, spec.in_width) != (spec.out_height, spec.out_width):
        raise ValueError("identity wiring needs equal input and output shapes")
    w = np.zeros((spec.out_features, spec.in_features))
    np.fill_diagonal(w, strength)
    return Genotype(np.concatenate([w.ravel(), np.zeros(spec.out_features)]), spec.param_layout)


class ToyReasoner:
    concurrency_safe = True

    def __init__(self, spec: ToyReasonerSpec):
        self.spec = spec
        self.partition = spec.param_layout

    def predict(self, genotype: Genotype, task: ArcTask, test_input: Grid) -> str:
        return serialize_grid(toy_forward(self.spec, genotype, test_input))


DEFAULT_PROMPT_TEMPLATE = (
    "[System prompt]\n"
    "You are an expert at solving abstract visual reasoning puzzles. Each puzzle "
    "shows a few input/output grid examples that share one hidden transformation. "
    "Grids are written one digit (color 0-9) per cell, with rows separated by '|'.\n"
    "Infer the transformation and apply it to the test input. Reply with the "
    "output grid only, in the same format.\n"
    "\n"
    "[User prompt]\n"
    "Training examples:\n"
    "{train_pairs}\n"
    "Test input:\n"
    "{test_input}\n"
    "Test output:"
)


@dataclass(frozen=True)
class RemoteReasonerSpec:
    endpoint: str
    timeout: float = 30.0
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    max_retries: int = 2

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


def render_prompt(template: str, task: ArcTask, test_input: Grid) -> str:
    train = "\n".join(
        f"Example {n}: input {serialize_grid(i)} -> output {serialize_grid(o)}"
        for n, (i, o) in enumerate(task.train, 1)
    )
    # str.replace rather than format(): templates may contain literal braces
    return template.replace("{train_pairs}", train).replace("{test_input}", serialize_grid(test_input))


def remote_predict(spec: RemoteReasonerSpec, task: ArcTask, test_input: Grid) -> str:
    """POST ``{"prompt": ...}`` to the endpoint and return its ``"answer"``.

    Transport errors and timeouts are retried ``max_retries`` times; HTTP
    error statuses and bad payloads are not. Every failure surfaces as a
    :class:`ReasonerFailure` whose ``kind`` is one of ``timeout``,
    ``transport``, ``http_status``, ``bad_response`` or ``missing_field``.
    """
    body = json.dumps({"prompt": render_prompt(spec.prompt_template, task, test_input)}).encode("utf-8")
    last: Optional[ReasonerFailure] = None
    for _ in range(spec.max_retries + 1):
        request = urllib.request.Request(
            spec.endpoint, data=body, method="POST",
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(request, timeout=spec.timeout) as response:
                raw = response.read()
        except urllib.error.HTTPError as exc:
            raise ReasonerFailure("http_status", f"endpoint returned {exc.code}") from exc
        except (socket.timeout, TimeoutError) as exc:
            last = ReasonerFailure("timeout", str(exc))
            continue
        except urllib.error.URLError as exc:
            kind = "timeout" if isinstance(exc.reason, (socket.timeout, TimeoutError)) else "transport"
            last = ReasonerFailure(kind, str(exc.reason))
            continue
        except OSError as exc:
            last = ReasonerFailure("transport", str(exc))
            continue
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ReasonerFailure("bad_response", "reply is not JSON") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("answer"), str):
            raise ReasonerFailure("missing_field", "reply has no string 'answer' field")
        return payload["answer"].strip()
    assert last is not None
    raise last


class RemoteReasoner:
    """Scores a remote model. It has no evolvable parameters.

    At most ``max_connections`` requests are in flight at once.
    """

    concurrency_safe = True
    partition = None

    def __init__(self, spec: RemoteReasonerSpec, max_connections: int = 4):
        self.spec = spec
        self._gate = threading.BoundedSemaphore(max_connections)

    def predict(self, genotype, task: ArcTask, test_input: Grid) -> str:
        with self._gate:
            return remote_predict(self.spec, task, test_input)
