"""Versioned binary checkpoint format.

Layout (all integers little-endian u32, all reals little-endian f64)::

    b"S2V1"
    engine_id d p b K T head_depth          # engine_id: 0 mean_field, 1 loopy_bp, 2 damped_bp, 3 trbp
    flags                                    # bit 0: head biases present, bit 1: regression task
    epoch
    val_metric (f64)
    n_arrays
    n_arrays x { rows cols data[rows*cols] } # engine W1..Wn, then head H, bH, U, bU (those present)
    config_len config_text[config_len]       # UTF-8 echo of the training config

Bias vectors are stored as 1 x n matrices. ``b`` is 0 for a depth-1 head.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .config import TrainConfig, build_config, parse_config_text
from .dataio import write_atomic_bytes
from .embed import EmbedParams, EngineKind, weight_shapes
from .head import HeadParams, TaskKind, head_shapes
from .model import Params

MAGIC = b"S2V1"


class CheckpointError(ValueError):
    pass


@dataclass
class ModelCheckpoint:
    params: Params
    config: TrainConfig
    epoch: int = 0
    val_metric: float = float("nan")


def to_bytes(ckpt: ModelCheckpoint) -> bytes:
    p = ckpt.params
    head = p.head
    b = head.weights["H"].shape[0] if head.depth == 2 else 0
    flags = (1 if head.bias else 0) | (0 if p.task.is_classification else 2)
    parts = [MAGIC, struct.pack("<7I", p.engine.code, p.embed.d, p.embed.p, b, p.task.outputs, p.embed.T, head.depth)]
    parts.append(struct.pack("<IId", flags, ckpt.epoch, ckpt.val_metric))
    arrays = p.arrays()
    parts.append(struct.pack("<I", len(arrays)))
    for a in arrays.values():
        m = np.atleast_2d(a)
        parts.append(struct.pack("<II", *m.shape))
        parts.append(np.ascontiguousarray(m, dtype="<f8").tobytes())
    text = ckpt.config.to_text().encode("utf-8")
    parts.append(struct.pack("<I", len(text)))
    parts.append(text)
    return b"".join(parts)


def from_bytes(data: bytes) -> ModelCheckpoint:
    if data[:4] != MAGIC:
        raise CheckpointError("not an S2V1 checkpoint (bad magic)")
    off = 4

    def read(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(data):
            raise CheckpointError("truncated checkpoint")
        vals = struct.unpack_from(fmt, data, off)
        off += size
        return vals

    engine_id, d, p, b, K, T, depth = read("<7I")
    flags, epoch, val_metric = read("<IId")
    if engine_id >= len(EngineKind):
        raise CheckpointError(f"unknown engine id {engine_id}")
    engine = EngineKind.from_code(engine_id)
    bias = bool(flags & 1)
    task = TaskKind.regression() if flags & 2 else TaskKind.classification(K)
    shapes = dict(weight_shapes(engine, d, p))
    shapes.update(head_shapes(d, K, depth, b, bias))
    (n_arrays,) = read("<I")
    if n_arrays != len(shapes):
        raise CheckpointError(f"expected {len(shapes)} arrays, found {n_arrays}")
    arrays = {}
    for name, shape in shapes.items():
        rows, cols = read("<II")
        want = shape if len(shape) == 2 else (1, shape[0])
        if (rows, cols) != want:
            raise CheckpointError(f"{name}: stored shape {(rows, cols)} != expected {want}")
        nbytes = 8 * rows * cols
        if off + nbytes > len(data):
            raise CheckpointError("truncated checkpoint")
        arr = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=off).astype(np.float64)
        off += nbytes
        arrays[name] = arr.reshape(shape)
    (clen,) = read("<I")
    config = build_config(parse_config_text(data[off : off + clen].decode("utf-8"), "<checkpoint>"))
    off += clen
    if off != len(data):
        raise CheckpointError("trailing bytes after checkpoint")
    embed_names = list(weight_shapes(engine, d, p))
    params = Params(
        EmbedParams(engine, T, {k: arrays[k] for k in embed_names}),
        HeadParams({k: v for k, v in arrays.items() if k not in embed_names}),
        task,
    )
    return ModelCheckpoint(params, config, epoch, val_metric)


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    write_atomic_bytes(path, to_bytes(ckpt))


def load_checkpoint(path) -> ModelCheckpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
