"""Minibatch SGD over the shared engine + head parameters.

One epoch shuffles the training indices (or draws them with replacement from
target-bucket weights when resampling is on), then for each minibatch runs the
forward pass, the exact reverse pass, and a descent step
``theta <- theta - lr * mean_gradient``.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import Gradients, loss_and_grad
from .checkpoint import ModelCheckpoint
from .config import ConfigError, TrainConfig
from .dataio import Dataset
from .embed import EngineKind, spanning_tree_weights
from .head import TaskKind, batch_loss
from .metrics import accuracy, auc, mae, rmse
from .model import Params, forward, init_params as _init_params
from .topology import GraphBatch

UpdateRule = Callable[[dict, Gradients, float], None]


class TrainingDiverged(FloatingPointError):
    pass


def sgd_update(arrays: dict[str, np.ndarray], grads: Gradients, lr: float) -> None:
    """Plain descent, in place."""
    if lr == 0.0:
        return
    for name, a in arrays.items():
        a -= lr * grads.arrays[name]


def init_params(config: TrainConfig, num_tags: int, task: TaskKind, rng: np.random.Generator) -> Params:
    return _init_params(config.engine_kind, config.d, num_tags, config.T, task, rng,
                        depth=config.head_depth, b=config.b, bias=config.bias)


def resolve_task(dataset: Dataset, config: TrainConfig) -> TaskKind:
    if config.task != "auto" and config.task != dataset.task.kind:
        raise ConfigError(f"config task {config.task!r} does not match dataset task {dataset.task.kind!r}")
    return dataset.task


def resample_weights(targets: Sequence[float], bucket_edges: Sequence[float], bucket_weights: Sequence[float]) -> np.ndarray:
    """Per-sample draw probabilities: each sample gets its target bucket's weight, then normalize.

    Bucket ``i`` holds targets in ``[edges[i-1], edges[i])``; the first and last
    buckets are open-ended.
    """
    edges = list(bucket_edges)
    if edges != sorted(edges):
        raise ValueError("bucket edges must be sorted")
    if len(bucket_weights) != len(edges) + 1:
        raise ValueError("need one more bucket weight than bucket edges")
    if any(w < 0 for w in bucket_weights):
        raise ValueError("bucket weights must be non-negative")
    w = np.array([bucket_weights[bisect_right(edges, float(t))] for t in targets], dtype=np.float64)
    total = w.sum()
    if not total > 0:
        raise ValueError("all sampling weights are zero")
    return w / total


class BatchFactory:
    """Builds :class:`GraphBatch` objects for index subsets of one dataset."""

    def __init__(self, dataset: Dataset, config: TrainConfig | None = None):
        self.dataset = dataset
        self.trbp = config is not None and config.engine_kind is EngineKind.TRBP
        self.tree_weights = config is not None and config.trbp_weights == "spanning_tree"
        self._weights: dict[int, np.ndarray] = {}

    def edge_weights(self, i: int) -> np.ndarray:
        if i not in self._weights:
            g = self.dataset.graphs[i]
            self._weights[i] = spanning_tree_weights(g) if self.tree_weights else np.ones(g.num_edges)
        return self._weights[i]

    def __call__(self, indices) -> GraphBatch:
        graphs = [self.dataset.graphs[i] for i in indices]
        ew = [self.edge_weights(i) for i in indices] if self.trbp else None
        return GraphBatch(graphs, self.dataset.num_tags, edge_weights=ew)


def _batch_grad(params: Params, factory: BatchFactory, idx: np.ndarray, y: np.ndarray, pool=None, workers: int = 1):
    """Mean loss and gradient over ``idx``; with workers > 1 the batch is split into
    contiguous chunks whose gradients are merged in chunk order."""
    if workers <= 1 or idx.size < 2:
        loss, grads, out = loss_and_grad(params, factory(idx), y)
        return loss, grads, out
    chunks = [c for c in np.array_split(np.arange(idx.size), min(workers, idx.size)) if c.size]

    def job(c):
        return loss_and_grad(params, factory(idx[c]), y[c])

    results = list(pool.map(job, chunks))
    total = Gradients.zeros_like(params)
    loss = 0.0
    outs = []
    for c, (l, g, o) in zip(chunks, results):
        share = c.size / idx.size
        total.accumulate(g, share)
        loss += share * l
        outs.append(o)
    return loss, total, np.concatenate(outs, axis=0)


def _diagnose(params: Params, factory: BatchFactory, idx, y) -> str:
    for i, yi in zip(idx, y):
        _, cache = forward(params, factory([i]))
        l = batch_loss(cache.out, np.atleast_1d(yi), params.task)[0]
        if not math.isfinite(l):
            norms = ", ".join(f"{k}={np.linalg.norm(v):.3g}" for k, v in params.arrays().items())
            return f"non-finite loss on graph {int(i)}; parameter norms: {norms}"
    norms = ", ".join(f"{k}={np.linalg.norm(v):.3g}" for k, v in params.arrays().items())
    return f"non-finite gradient in batch {list(map(int, idx))}; parameter norms: {norms}"


def sgd_epoch(
    dataset: Dataset,
    params: Params,
    config: TrainConfig,
    rng: np.random.Generator,
    indices: Sequence[int] | None = None,
    lr: float | None = None,
    update_rule: UpdateRule = sgd_update,
    factory: BatchFactory | None = None,
    pool: ThreadPoolExecutor | None = None,
) -> tuple[Params, float]:
    """One pass of minibatch SGD; updates ``params`` in place and returns it with the mean sample loss."""
    idx_all = np.arange(len(dataset)) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx_all.size == 0:
        raise ValueError("cannot train on an empty index set")
    lr = config.lr0 if lr is None else lr
    factory = factory or BatchFactory(dataset, config)
    if config.resample:
        probs = resample_weights(dataset.targets(idx_all), config.resample_edges, config.resample_weights)
        order = rng.choice(idx_all, size=idx_all.size, replace=True, p=probs)
    else:
        order = rng.permutation(idx_all)
    targets = dataset.targets(order)
    arrays = params.arrays()
    total, seen = 0.0, 0
    for start in range(0, order.size, config.batch_size):
        idx = order[start : start + config.batch_size]
        y = targets[start : start + config.batch_size]
        loss, grads, _ = _batch_grad(params, factory, idx, y, pool, config.workers)
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.arrays.values()):
            raise TrainingDiverged(_diagnose(params, factory, idx, y))
        if config.grad_clip is not None:
            norm = grads.norm()
            if norm > config.grad_clip:
                grads = Gradients({k: v * (config.grad_clip / norm) for k, v in grads.arrays.items()}, grads.count)
        update_rule(arrays, grads, lr)
        total += loss * idx.size
        seen += idx.size
    return params, total / seen


def predict_outputs(params: Params, dataset: Dataset, indices=None, batch_size: int = 256,
                    factory: BatchFactory | None = None) -> np.ndarray:
    idx_all = np.arange(len(dataset)) if indices is None else np.asarray(indices, dtype=np.int64)
    factory = factory or BatchFactory(dataset)
    outs = []
    for start in range(0, idx_all.size, batch_size):
        _, cache = forward(params, factory(idx_all[start : start + batch_size]))
        outs.append(cache.out)
    return np.concatenate(outs, axis=0) if outs else np.zeros((0, params.task.outputs))


def evaluate_outputs(out: np.ndarray, y: np.ndarray, task: TaskKind) -> dict[str, float]:
    res = {"loss": batch_loss(out, y, task)[0]}
    if task.is_classification:
        res["accuracy"] = accuracy(np.argmax(out, axis=1), y)
        if task.K == 2 and len(np.unique(y)) == 2:
            z = out - out.max(axis=1, keepdims=True)
            p1 = np.exp(z[:, 1]) / np.exp(z).sum(axis=1)
            res["auc"] = auc(p1, y)
    else:
        res["mae"] = mae(out[:, 0], y)
        res["rmse"] = rmse(out[:, 0], y)
    return res


def evaluate(params: Params, dataset: Dataset, indices=None, factory: BatchFactory | None = None) -> dict[str, float]:
    idx = np.arange(len(dataset)) if indices is None else np.asarray(indices, dtype=np.int64)
    out = predict_outputs(params, dataset, idx, factory=factory)
    return evaluate_outputs(out, dataset.targets(idx), params.task)


def selection_metric(task: TaskKind, metrics: dict[str, float], choice: str = "auto") -> tuple[str, float, bool]:
    """(name, value, higher_is_better) of the validation metric.

    ``auto`` picks AUC for binary classification, accuracy for multiclass and
    MAE for regression.
    """
    if choice != "auto":
        if choice not in metrics:
            raise ConfigError(f"metric {choice!r} is not available for this task")
        return choice, metrics[choice], choice in ("auc", "accuracy")
    if not task.is_classification:
        return "mae", metrics["mae"], False
    if task.K == 2 and "auc" in metrics:
        return "auc", metrics["auc"], True
    return "accuracy", metrics["accuracy"], True


@dataclass
class HistoryRow:
    epoch: int
    train_loss: float
    val_metric: float
    lr: float


@dataclass
class TrainResult:
    checkpoint: ModelCheckpoint
    history: list[HistoryRow] = field(default_factory=list)
    metric_name: str = ""

    @property
    def params(self) -> Params:
        return self.checkpoint.params


def history_csv(history: Sequence[HistoryRow]) -> str:
    lines = ["epoch,train_loss,val_metric,lr"]
    lines += [f"{r.epoch},{r.train_loss!r},{r.val_metric!r},{r.lr!r}" for r in history]
    return "\n".join(lines) + "\n"


def _better(cand: tuple[float, float], best: tuple[float, float] | None, higher: bool) -> bool:
    """Compare (metric, val_loss): metric first, lower validation loss breaks ties."""
    if best is None:
        return True
    m, l = cand
    bm, bl = best
    if m != bm:
        return m > bm if higher else m < bm
    return l < bl


def train(
    dataset: Dataset,
    splits: tuple[Sequence[int], Sequence[int]] | None,
    config: TrainConfig,
    update_rule: UpdateRule = sgd_update,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Train on ``splits[0]``, select the epoch with the best metric on ``splits[1]``.

    With an empty validation split the training set doubles as validation.
    Early stopping ends the run once ``early_stop_patience`` consecutive epochs
    fail to improve; the best checkpoint seen is always the one returned.
    """
    if splits is None:
        train_idx, val_idx = np.arange(len(dataset)), np.arange(0)
    else:
        train_idx, val_idx = (np.asarray(s, dtype=np.int64) for s in splits)
    if set(train_idx.tolist()) & set(val_idx.tolist()):
        raise ValueError("train and validation splits overlap")
    if val_idx.size == 0:
        val_idx = train_idx
    task = resolve_task(dataset, config)
    rng = np.random.default_rng(config.seed)
    params = init_params(config, dataset.num_tags, task, rng)
    factory = BatchFactory(dataset, config)
    metric_name, _, higher = selection_metric(task, evaluate(params, dataset, val_idx, factory), config.select_metric)

    def score(p):
        m = evaluate(p, dataset, val_idx, factory)
        return m[metric_name], m["loss"]

    init_score = score(params)
    best_params, best_epoch, best = params.copy(), 0, None
    if config.epochs == 0:
        best = init_score
    history: list[HistoryRow] = []
    bad = 0
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for epoch in range(1, config.epochs + 1):
            lr = config.lr_at(epoch)
            _, loss = sgd_epoch(dataset, params, config, rng, train_idx, lr, update_rule, factory, pool)
            cand = score(params)
            history.append(HistoryRow(epoch, loss, cand[0], lr))
            if log:
                log(f"epoch {epoch:4d}  lr {lr:.3g}  train_loss {loss:.6f}  val_{metric_name} {cand[0]:.6f}")
            if _better(cand, best, higher):
                best, best_params, best_epoch, bad = cand, params.copy(), epoch, 0
            else:
                bad += 1
                if config.early_stop_patience is not None and bad > config.early_stop_patience:
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    ckpt = ModelCheckpoint(best_params, config, best_epoch, best[0] if best else init_score[0])
    return TrainResult(ckpt, history, metric_name)
