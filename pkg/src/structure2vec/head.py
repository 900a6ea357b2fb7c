"""Prediction head on pooled embeddings, and the two supervised losses.

Depth 1 computes ``U relu(pooled)``; depth 2 adds a hidden ReLU layer,
``U relu(H relu(pooled))``. Bias vectors ``bH``/``bU`` are optional.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, check_finite, gemm_nt_ordered, log_softmax, relu, relu_mask, softmax


@dataclass(frozen=True)
class TaskKind:
    kind: str  # "regression" or "classification"
    K: int = 1

    def __post_init__(self):
        if self.kind not in ("regression", "classification"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "classification" and self.K < 2:
            raise ValueError("classification needs K >= 2")
        if self.kind == "regression" and self.K != 1:
            raise ValueError("regression has a single output")

    @classmethod
    def regression(cls) -> "TaskKind":
        return cls("regression", 1)

    @classmethod
    def classification(cls, K: int) -> "TaskKind":
        return cls("classification", K)

    @property
    def is_classification(self) -> bool:
        return self.kind == "classification"

    @property
    def outputs(self) -> int:
        return self.K


@dataclass
class HeadParams:
    weights: dict[str, np.ndarray]

    def __post_init__(self):
        w = self.weights
        if "U" not in w:
            raise ShapeError("head needs a U matrix")
        if "H" in w and w["U"].shape[1] != w["H"].shape[0]:
            raise ShapeError(f"U {w['U'].shape} does not follow H {w['H'].shape}")
        if "bH" in w and ("H" not in w or w["bH"].shape != (w["H"].shape[0],)):
            raise ShapeError("bH must match the hidden layer")
        if "bU" in w and w["bU"].shape != (w["U"].shape[0],):
            raise ShapeError("bU must match the output layer")
        for name, a in w.items():
            check_finite(a, name)

    @property
    def depth(self) -> int:
        return 2 if "H" in self.weights else 1

    @property
    def d(self) -> int:
        return (self.weights["H"] if self.depth == 2 else self.weights["U"]).shape[1]

    @property
    def outputs(self) -> int:
        return self.weights["U"].shape[0]

    @property
    def bias(self) -> bool:
        return "bU" in self.weights


def head_shapes(d: int, K: int, depth: int = 2, b: int = 32, bias: bool = False) -> dict[str, tuple]:
    if depth == 1:
        shapes = {"U": (K, d)}
        if bias:
            shapes["bU"] = (K,)
        return shapes
    if depth != 2:
        raise ValueError("head depth must be 1 or 2")
    shapes = {"H": (b, d)}
    if bias:
        shapes["bH"] = (b,)
    shapes["U"] = (K, b)
    if bias:
        shapes["bU"] = (K,)
    return shapes


@dataclass
class HeadCache:
    pooled: np.ndarray
    h1: np.ndarray
    a2: np.ndarray | None
    h2: np.ndarray | None
    out: np.ndarray

    def preactivations(self) -> list[np.ndarray]:
        return [self.pooled] + ([self.a2] if self.a2 is not None else [])


def head_forward(pooled: np.ndarray, head: HeadParams) -> HeadCache:
    """Batched head: ``pooled`` is G x d, output is G x K.

    Products use a fixed left-to-right inner order, so zero-padding the hidden
    layer cannot change any output bit.
    """
    w = head.weights
    if pooled.shape[-1] != head.d:
        raise ShapeError(f"pooled length {pooled.shape[-1]} != head input {head.d}")
    h1 = relu(pooled)
    a2 = h2 = None
    last = h1
    if head.depth == 2:
        a2 = gemm_nt_ordered(h1, w["H"])
        if "bH" in w:
            a2 = a2 + w["bH"]
        h2 = relu(a2)
        last = h2
    out = gemm_nt_ordered(last, w["U"])
    if "bU" in w:
        out = out + w["bU"]
    return HeadCache(pooled, h1, a2, h2, out)


def predict(pooled: np.ndarray, head: HeadParams) -> np.ndarray:
    pooled = np.asarray(pooled, dtype=np.float64)
    if pooled.ndim != 1:
        raise ShapeError("predict takes one pooled vector")
    return head_forward(pooled[None, :], head).out[0]


def square_loss(pred: float, y: float) -> float:
    r = float(y) - float(pred)
    return r * r


def softmax_ce_loss(logits, y: int) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= int(y) < logits.shape[0]:
        raise ValueError(f"class {y} outside [0, {logits.shape[0]})")
    probs = softmax(logits)
    return float(-log_softmax(logits)[int(y)]), probs


def batch_loss(out: np.ndarray, y: np.ndarray, task: TaskKind) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean loss over the batch, per-sample losses, and d(mean loss)/d(out)."""
    G = out.shape[0]
    if task.is_classification:
        y = np.asarray(y, dtype=np.int64)
        if np.any(y < 0) or np.any(y >= out.shape[1]):
            raise ValueError("class id out of range")
        logp = log_softmax(out)
        per = -logp[np.arange(G), y]
        d_out = softmax(out)
        d_out[np.arange(G), y] -= 1.0
        return float(np.mean(per)), per, d_out / G
    y = np.asarray(y, dtype=np.float64)
    resid = out[:, 0] - y
    per = resid * resid
    return float(np.mean(per)), per, (2.0 * resid / G)[:, None]


def head_backward(cache: HeadCache, head: HeadParams, d_out: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients of the head weights and of the loss w.r.t. the pooled vectors."""
    w = head.weights
    grads: dict[str, np.ndarray] = {}
    last = cache.h2 if head.depth == 2 else cache.h1
    grads["U"] = d_out.T @ last
    if "bU" in w:
        grads["bU"] = d_out.sum(axis=0)
    d_last = d_out @ w["U"]
    if head.depth == 2:
        d_a2 = d_last * relu_mask(cache.a2)
        grads["H"] = d_a2.T @ cache.h1
        if "bH" in w:
            grads["bH"] = d_a2.sum(axis=0)
        d_h1 = d_a2 @ w["H"]
    else:
        d_h1 = d_last
    d_pooled = d_h1 * relu_mask(cache.pooled)
    return {k: grads[k] for k in w}, d_pooled
