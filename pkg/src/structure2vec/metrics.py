"""Evaluation metrics: AUC, accuracy, MAE, RMSE, and the mean-predictor baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _pair(a, b, what: str):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"{what}: length mismatch {a.size} vs {b.size}")
    return a, b


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(random positive outranks random negative), ties count 1/2.

    Computed from average ranks in O(n log n). The rank sum is a multiple of 1/2,
    so the result is exact for any realistic n.
    """
    s, y = _pair(scores, labels, "auc")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int((y == 0).sum())
    if n_pos + n_neg != y.size:
        raise ValueError("auc labels must be 0/1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both classes present")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(s.size)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        # 1-based ranks i+1..j+1, averaged; doubled to stay integral
        ranks[order[i : j + 1]] = (i + j + 2)
        i = j + 1
    u2 = float(ranks[pos].sum()) - n_pos * (n_pos + 1)
    return (u2 / 2.0) / (n_pos * n_neg)


def auc_bruteforce(scores, labels) -> float:
    """O(n^2) pair count; reference for :func:`auc`."""
    s, y = _pair(scores, labels, "auc")
    P = s[y == 1]
    N = s[y == 0]
    if P.size == 0 or N.size == 0:
        raise ValueError("auc needs both classes present")
    twice = 0
    for a in P:
        for b in N:
            twice += 2 if a > b else (1 if a == b else 0)
    return (twice / 2.0) / (P.size * N.size)


def accuracy(preds, labels) -> float:
    p = np.asarray(preds).reshape(-1)
    t = np.asarray(labels).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"accuracy: length mismatch {p.size} vs {t.size}")
    if p.size == 0:
        raise ValueError("accuracy of an empty set")
    return float(np.mean(p == t))


def mae(preds, targets) -> float:
    p, t = _pair(preds, targets, "mae")
    if p.size == 0:
        raise ValueError("mae of an empty set")
    return float(np.mean(np.abs(p - t)))


def rmse(preds, targets) -> float:
    p, t = _pair(preds, targets, "rmse")
    if p.size == 0:
        raise ValueError("rmse of an empty set")
    r = np.abs(p - t)
    m = float(r.max())
    if m == 0.0 or not np.isfinite(m):
        return m
    # scaled by the largest residual so squaring neither underflows nor overflows
    return m * float(np.sqrt(np.mean((r / m) ** 2)))


@dataclass(frozen=True)
class MeanPredictor:
    value: float

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, self.value)


def mean_predictor(train_targets) -> MeanPredictor:
    t = np.asarray(train_targets, dtype=np.float64).reshape(-1)
    if t.size == 0:
        raise ValueError("mean predictor needs at least one target")
    return MeanPredictor(float(np.mean(t)))
