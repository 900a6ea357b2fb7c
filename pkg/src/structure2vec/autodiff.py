"""Reverse-mode gradients through the unrolled engines, plus a finite-difference oracle.

Backward passes walk the rounds in reverse, masking with the stored ReLU
preactivations. Per-round weight-gradient contributions are collected and then
summed in ascending round order, so results do not depend on traversal order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .embed import EmbeddingState, EngineKind, pool
from .graph import Graph
from .head import HeadParams, TaskKind, batch_loss, head_backward, head_forward
from .model import Params, forward
from .tensor import ShapeError, relu_mask
from .topology import GraphBatch


@dataclass
class Gradients:
    arrays: dict[str, np.ndarray]
    count: int = 0

    @classmethod
    def zeros_like(cls, params: Params) -> "Gradients":
        return cls(params.zeros_like(), 0)

    def accumulate(self, other: "Gradients", scale: float = 1.0) -> None:
        for k, v in other.arrays.items():
            self.arrays[k] = self.arrays[k] + scale * v
        self.count += other.count

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(v * v)) for v in self.arrays.values())))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]


def _ascending_sum(parts: list[np.ndarray]) -> np.ndarray:
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


def _as_batch(g, num_tags: int) -> GraphBatch:
    return g if isinstance(g, GraphBatch) else GraphBatch([g], num_tags)


def _node_grad(batch: GraphBatch, d_pooled: np.ndarray) -> np.ndarray:
    d_pooled = np.atleast_2d(d_pooled)
    if d_pooled.shape[0] != batch.num_graphs:
        raise ShapeError(f"{d_pooled.shape[0]} pooled gradients for {batch.num_graphs} graphs")
    return d_pooled[batch.node_graph]


def backward_head(state: EmbeddingState, head: HeadParams, task: TaskKind, y, batch: GraphBatch | None = None):
    """Head-weight gradients and dL/d(pooled) for the mean loss over the graphs in ``state``."""
    if state is None or not state.mu:
        raise ValueError("backward_head needs a cached forward state")
    pooled = pool(state, batch) if batch is not None else pool(state)[None, :]
    cache = head_forward(pooled, head)
    _, _, d_out = batch_loss(cache.out, np.atleast_1d(y), task)
    grads, d_pooled = head_backward(cache, head, d_out)
    return grads, (d_pooled if batch is not None else d_pooled[0])


def backward_mf(g, params, state: EmbeddingState, d_pooled) -> dict[str, np.ndarray]:
    if params.engine is not EngineKind.MEAN_FIELD or state.engine is not EngineKind.MEAN_FIELD:
        raise ShapeError("backward_mf needs mean-field parameters and state")
    batch = _as_batch(g, params.p)
    w = params.weights
    X = batch.X
    T = state.T
    g_mu = _node_grad(batch, d_pooled)
    gW1, gW2 = [None] * (T + 1), [None] * (T + 1)
    for t in range(T, 0, -1):
        gp = g_mu * relu_mask(state.pre["mu"][t])
        gW1[t] = gp.T @ X
        gW2[t] = gp.T @ state.agg["mu"][t]
        if t > 1:
            g_mu = batch.neighbor_sum.apply(gp @ w["W2"])
    return {"W1": _ascending_sum(gW1[1:]), "W2": _ascending_sum(gW2[1:])}


def backward_lbp(g, params, state: EmbeddingState, d_pooled) -> dict[str, np.ndarray]:
    if params.engine is not EngineKind.LOOPY_BP or state.engine is not EngineKind.LOOPY_BP:
        raise ShapeError("backward_lbp needs loopy-BP parameters and state")
    batch = _as_batch(g, params.p)
    w = params.weights
    X = batch.X
    Xs = X[batch.src]
    T = state.T
    gq = _node_grad(batch, d_pooled) * relu_mask(state.pre["readout"][1])
    gW3 = gq.T @ X
    gW4 = gq.T @ state.agg["readout"][1]
    g_nu = (gq @ w["W4"])[batch.dst]
    gW1, gW2 = [None] * (T + 1), [None] * (T + 1)
    for t in range(T, 0, -1):
        gp = g_nu * relu_mask(state.pre["nu"][t])
        gW1[t] = gp.T @ Xs
        gW2[t] = gp.T @ state.agg["nu"][t]
        if t > 1:
            g_nu = batch.exclusive_sum_T.apply(gp @ w["W2"])
    return {"W1": _ascending_sum(gW1[1:]), "W2": _ascending_sum(gW2[1:]), "W3": gW3, "W4": gW4}


def backward_damped(g, params, state: EmbeddingState, d_pooled) -> dict[str, np.ndarray]:
    if params.engine is not EngineKind.DAMPED_BP or state.engine is not EngineKind.DAMPED_BP:
        raise ShapeError("backward_damped needs damped-BP parameters and state")
    batch = _as_batch(g, params.p)
    w = params.weights
    X = batch.X
    src, dst, rev = batch.src, batch.dst, batch.rev
    Xs = X[src]
    T = state.T
    g_mu = _node_grad(batch, d_pooled)
    g_nu = np.zeros_like(state.nu[-1])
    parts = {k: [None] * (T + 1) for k in ("W1", "W2", "W3", "W4", "W5", "W6", "W7")}
    for t in range(T, 0, -1):
        gpn = g_nu * relu_mask(state.pre["nu"][t])
        gpm = g_mu * relu_mask(state.pre["mu"][t])
        inc = state.agg["incoming"][t]
        nu_prev, mu_prev = state.nu[t - 1], state.mu[t - 1]
        parts["W1"][t] = gpn.T @ Xs
        parts["W2"][t] = gpn.T @ inc[src]
        parts["W3"][t] = gpn.T @ nu_prev[rev]
        parts["W4"][t] = gpn.T @ mu_prev[src]
        parts["W5"][t] = gpm.T @ X
        parts["W6"][t] = gpm.T @ mu_prev
        parts["W7"][t] = gpm.T @ inc
        if t > 1:
            g_inc = batch.outgoing_sum.apply(gpn @ w["W2"]) + gpm @ w["W7"]
            g_nu = g_inc[dst] + (gpn @ w["W3"])[rev]
            g_mu = batch.outgoing_sum.apply(gpn @ w["W4"]) + gpm @ w["W6"]
    return {k: _ascending_sum(v[1:]) for k, v in parts.items()}


def backward_trbp(g, params, state: EmbeddingState, d_pooled) -> dict[str, np.ndarray]:
    """Reverse pass for TRBP. A bare ``Graph`` implies unit edge weights; pass the
    forward's :class:`GraphBatch` otherwise."""
    if params.engine is not EngineKind.TRBP or state.engine is not EngineKind.TRBP:
        raise ShapeError("backward_trbp needs TRBP parameters and state")
    batch = g if isinstance(g, GraphBatch) else GraphBatch([g], params.p, edge_weights=[np.ones(g.num_edges)])
    w = params.weights
    X = batch.X
    Xs = X[batch.src]
    v = batch.edge_weight[:, None]
    T = state.T
    gq = _node_grad(batch, d_pooled) * relu_mask(state.pre["readout"][1])
    gW4 = gq.T @ X
    gW5 = gq.T @ state.agg["readout"][1]
    g_nu = v * (gq @ w["W5"])[batch.dst]
    gW1, gW2, gW3 = [None] * (T + 1), [None] * (T + 1), [None] * (T + 1)
    for t in range(T, 0, -1):
        gp = g_nu * relu_mask(state.pre["nu"][t])
        gW1[t] = gp.T @ Xs
        gW2[t] = gp.T @ state.agg["nu"][t]
        gW3[t] = gp.T @ state.agg["reverse"][t]
        if t > 1:
            g_nu = batch.exclusive_sum_weighted_T.apply(gp @ w["W2"]) + v * (gp @ w["W3"])[batch.rev]
    return {
        "W1": _ascending_sum(gW1[1:]), "W2": _ascending_sum(gW2[1:]), "W3": _ascending_sum(gW3[1:]),
        "W4": gW4, "W5": gW5,
    }


_BACKWARD = {
    EngineKind.MEAN_FIELD: backward_mf,
    EngineKind.LOOPY_BP: backward_lbp,
    EngineKind.DAMPED_BP: backward_damped,
    EngineKind.TRBP: backward_trbp,
}


def backward_embed(batch: GraphBatch, params, state: EmbeddingState, d_pooled) -> dict[str, np.ndarray]:
    return _BACKWARD[params.engine](batch, params, state, d_pooled)


def model_loss(params: Params, batch: GraphBatch, y) -> float:
    _, cache = forward(params, batch)
    return batch_loss(cache.out, np.asarray(y), params.task)[0]


def loss_and_grad(params: Params, batch: GraphBatch, y):
    """Mean loss over the batch, its exact gradient, and the per-graph outputs."""
    state, cache = forward(params, batch)
    loss, per, d_out = batch_loss(cache.out, np.asarray(y), params.task)
    g_head, d_pooled = head_backward(cache, params.head, d_out)
    g_embed = backward_embed(batch, params.embed, state, d_pooled)
    arrays = dict(g_embed)
    arrays.update(g_head)
    return loss, Gradients({k: arrays[k] for k in params.arrays()}, batch.num_graphs), cache.out


def finite_diff_grad(loss_fn: Callable[[], float], arrays: dict[str, np.ndarray], h: float = 1e-5) -> Gradients:
    """Central differences of ``loss_fn`` w.r.t. every entry of ``arrays`` (perturbed in place)."""
    if h <= 0:
        raise ValueError("step must be positive")
    out = {}
    for name, a in arrays.items():
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            g.reshape(-1)[i] = (lp - lm) / (2.0 * h)
        out[name] = g
    return Gradients(out, 1)


@dataclass
class ParamCheck:
    name: str
    max_rel_error: float
    checked: int
    excluded: int
    passed: bool


@dataclass
class GradCheckReport:
    tol: float
    abs_floor: float
    params: list[ParamCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.params)

    @property
    def failed(self) -> list[str]:
        return [p.name for p in self.params if not p.passed]

    @property
    def max_rel_error(self) -> float:
        return max((p.max_rel_error for p in self.params), default=0.0)

    def __str__(self) -> str:
        lines = [f"{'param':<6} {'max_rel_err':>12} {'checked':>8} {'kink_excl':>9}  result"]
        for p in self.params:
            lines.append(
                f"{p.name:<6} {p.max_rel_error:12.3e} {p.checked:8d} {p.excluded:9d}  {'PASS' if p.passed else 'FAIL'}"
            )
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} (tol={self.tol:g}, floor={self.abs_floor:g})")
        return "\n".join(lines)


def _activation_pattern(params: Params, batch: GraphBatch, y):
    state, cache = forward(params, batch)
    loss = batch_loss(cache.out, np.asarray(y), params.task)[0]
    masks = [a > 0.0 for a in state.preactivations() + cache.preactivations()]
    return loss, masks


def _same_pattern(a, b) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    g,
    params: Params,
    y,
    tol: float = 1e-4,
    h: float = 1e-5,
    abs_floor: float = 1e-7,
    corrupt: dict[str, float] | None = None,
) -> GradCheckReport:
    """Compare analytic gradients with central differences, parameter by parameter.

    A coordinate is excluded as kink-adjacent when the step +-h changes which
    ReLU units are active anywhere in the network; central differences across
    a kink do not estimate the derivative. ``corrupt`` scales named analytic
    gradients (negative control).
    """
    batch = _as_batch(g, params.embed.p) if isinstance(g, (Graph, GraphBatch)) else GraphBatch(list(g), params.embed.p)
    y = np.atleast_1d(np.asarray(y))
    _, grads, _ = loss_and_grad(params, batch, y)
    _, base_mask = _activation_pattern(params, batch, y)
    report = GradCheckReport(tol, abs_floor)
    for name, a in params.arrays().items():
        analytic = grads.arrays[name] * (corrupt or {}).get(name, 1.0)
        flat = a.reshape(-1)
        worst, checked, excluded = 0.0, 0, 0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, mp = _activation_pattern(params, batch, y)
            flat[i] = orig - h
            lm, mm = _activation_pattern(params, batch, y)
            flat[i] = orig
            if not (_same_pattern(mp, base_mask) and _same_pattern(mm, base_mask)):
                excluded += 1
                continue
            numeric = (lp - lm) / (2.0 * h)
            an = float(analytic.reshape(-1)[i])
            denom = max(abs(an), abs(numeric), abs_floor / tol)
            worst = max(worst, abs(an - numeric) / denom)
            checked += 1
        report.params.append(ParamCheck(name, worst, checked, excluded, worst <= tol))
    return report
