"""Full parameter set: embedding engine weights, head weights, and the task."""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .embed import EmbedParams, EngineKind, embed_batch, pool, weight_shapes
from .head import HeadCache, HeadParams, TaskKind, head_forward, head_shapes
from .embed import EmbeddingState
from .topology import GraphBatch


@dataclass
class Params:
    embed: EmbedParams
    head: HeadParams
    task: TaskKind

    def __post_init__(self):
        if self.head.d != self.embed.d:
            raise ValueError(f"head input {self.head.d} != embedding dim {self.embed.d}")
        if self.head.outputs != self.task.outputs:
            raise ValueError(f"head has {self.head.outputs} outputs, task needs {self.task.outputs}")

    @property
    def engine(self) -> EngineKind:
        return self.embed.engine

    def arrays(self) -> dict[str, np.ndarray]:
        """All learnable arrays in canonical order (engine matrices, then head)."""
        out = dict(self.embed.weights)
        out.update(self.head.weights)
        return out

    def copy(self) -> "Params":
        return copy.deepcopy(self)

    def num_parameters(self) -> int:
        return int(sum(a.size for a in self.arrays().values()))

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays().items()}


def init_params(
    engine,
    d: int,
    p: int,
    T: int,
    task: TaskKind,
    rng: np.random.Generator,
    depth: int = 2,
    b: int = 32,
    bias: bool = False,
) -> Params:
    """Every matrix i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases start at 0.

    Draw order follows :meth:`Params.arrays`, so a seed fixes the result.
    """
    engine = EngineKind.parse(engine)
    shapes = dict(weight_shapes(engine, d, p))
    shapes.update(head_shapes(d, task.outputs, depth, b, bias))
    arrays = {}
    for name, shape in shapes.items():
        if len(shape) == 1:
            arrays[name] = np.zeros(shape)
            continue
        bound = 1.0 / np.sqrt(shape[1])
        arrays[name] = rng.uniform(-bound, bound, size=shape)
    embed_names = list(weight_shapes(engine, d, p))
    return Params(
        EmbedParams(engine, T, {k: arrays[k] for k in embed_names}),
        HeadParams({k: v for k, v in arrays.items() if k not in embed_names}),
        task,
    )


def forward(params: Params, batch: GraphBatch) -> tuple[EmbeddingState, HeadCache]:
    state = embed_batch(batch, params.embed)
    cache = head_forward(pool(state, batch), params.head)
    return state, cache
