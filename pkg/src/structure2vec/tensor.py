"""Dense float64 kernel shared by every other module.

Matrices are row-major ``numpy.ndarray`` objects of dtype float64 (``Mat``), vectors
are 1-D float64 arrays (``Vec64``). The helpers here validate shapes and
finiteness; the arithmetic itself is numpy.

Setting ``S2V_DEBUG=1`` (or calling :func:`set_debug`) turns on a validator that
checks every op output for NaN/Inf.
"""
from __future__ import annotations

import os

import numpy as np

Mat = np.ndarray
Vec64 = np.ndarray

_DEBUG = os.environ.get("S2V_DEBUG", "") not in ("", "0")


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def set_debug(enabled: bool) -> None:
    global _DEBUG
    _DEBUG = bool(enabled)


def debug_enabled() -> bool:
    return _DEBUG


def check_finite(x: np.ndarray, what: str = "value") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.isfinite(np.atleast_1d(x)))[0]
        raise NonFiniteError(f"non-finite {what} at index {tuple(int(v) for v in bad)}")
    return x


def _out(x: np.ndarray, op: str) -> np.ndarray:
    if _DEBUG:
        check_finite(x, f"output of {op}")
    return x


def mat(rows: int, cols: int, data=None) -> Mat:
    """Build a ``rows x cols`` matrix from a flat row-major sequence (zeros if omitted)."""
    if data is None:
        return np.zeros((rows, cols))
    arr = np.array(data, dtype=np.float64).reshape(-1)
    if arr.size != rows * cols:
        raise ShapeError(f"data length {arr.size} != {rows}*{cols}")
    check_finite(arr, "matrix entry")
    return arr.reshape(rows, cols)


def vec(data) -> Vec64:
    arr = np.array(data, dtype=np.float64).reshape(-1)
    check_finite(arr, "vector entry")
    return arr


def gemv(A: Mat, x: Vec64, accumulate_into: Vec64) -> Vec64:
    """Return ``accumulate_into + A @ x`` without touching the operands."""
    if A.ndim != 2 or x.ndim != 1 or accumulate_into.ndim != 1:
        raise ShapeError(f"gemv expects matrix/vector/vector, got {A.shape}, {x.shape}, {accumulate_into.shape}")
    if A.shape[1] != x.shape[0] or A.shape[0] != accumulate_into.shape[0]:
        raise ShapeError(
            f"gemv shape mismatch: A{A.shape} x{x.shape} acc{accumulate_into.shape}"
        )
    return _out(accumulate_into + A @ x, "gemv")


def gemm(A: Mat, B: Mat) -> Mat:
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ShapeError(f"gemm shape mismatch: {A.shape} @ {B.shape}")
    return _out(A @ B, "gemm")


def gemm_nt(A: Mat, B: Mat) -> Mat:
    """``A @ B.T`` as a separate op (no transposed views in the public API)."""
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ShapeError(f"gemm_nt shape mismatch: {A.shape} @ {B.shape}^T")
    return _out(A @ B.T, "gemm_nt")


def gemm_tn(A: Mat, B: Mat) -> Mat:
    """``A.T @ B``; used for weight gradients (outer-product accumulation)."""
    if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[0]:
        raise ShapeError(f"gemm_tn shape mismatch: {A.shape}^T @ {B.shape}")
    return _out(A.T @ B, "gemm_tn")


def gemm_nt_ordered(A: Mat, B: Mat) -> Mat:
    """``A @ B.T`` with every entry summed strictly left to right over the inner index.

    Slower than BLAS; used where results must not depend on zero padding of the
    inner dimension.
    """
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ShapeError(f"gemm_nt shape mismatch: {A.shape} @ {B.shape}^T")
    out = np.zeros((A.shape[0], B.shape[0]))
    for k in range(A.shape[1]):
        out += A[:, k : k + 1] * B[:, k][None, :]
    return _out(out, "gemm_nt_ordered")


def relu(x: np.ndarray) -> np.ndarray:
    # np.where maps -0.0 to +0.0, np.maximum would keep the sign bit
    return _out(np.where(x > 0.0, x, 0.0), "relu")


def relu_mask(preactivation: np.ndarray) -> np.ndarray:
    """1 where the preactivation is strictly positive, else 0 (subgradient 0 at the kink)."""
    return (preactivation > 0.0).astype(np.float64)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    if logits.shape[-1] < 1:
        raise ShapeError("softmax of an empty vector")
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return _out(e / np.sum(e, axis=-1, keepdims=True), "softmax")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return _out(z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True)), "log_softmax")
