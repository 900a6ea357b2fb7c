"""Embedding engines: unrolled, parametrized fixed-point iterations.

Each engine runs ``T`` synchronous rounds (round ``t`` only reads round ``t-1``)
starting from all-zero embeddings/messages, and keeps every intermediate
quantity needed by the reverse pass in :class:`EmbeddingState`.

Engines and their updates (``s`` is ReLU, ``x_i`` the one-hot tag of node i):

* mean field:   mu_i = s(W1 x_i + W2 sum_{j in N(i)} mu_j)
* loopy BP:     nu_ij = s(W1 x_i + W2 sum_{k in N(i)\\j} nu_ki),
                readout mu_i = s(W3 x_i + W4 sum_{k in N(i)} nu_ki)
* damped BP:    nu_ij = s(W1 x_i + W2 sum_{k in N(i)} nu_ki + W3 nu_ji + W4 mu_i),
                mu_i  = s(W5 x_i + W6 mu_i + W7 sum_{k in N(i)} nu_ki)
* tree-reweighted BP: loopy BP with messages scaled by edge appearance
                probabilities v, plus a W3 v_ij nu_ji reverse-message term.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .graph import Graph, GraphError
from .tensor import ShapeError, check_finite, relu
from .topology import GraphBatch


class EngineKind(str, Enum):
    MEAN_FIELD = "mean_field"
    LOOPY_BP = "loopy_bp"
    DAMPED_BP = "damped_bp"
    TRBP = "trbp"

    @property
    def code(self) -> int:
        return list(EngineKind).index(self)

    @classmethod
    def from_code(cls, code: int) -> "EngineKind":
        return list(cls)[code]

    @classmethod
    def parse(cls, name) -> "EngineKind":
        if isinstance(name, EngineKind):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "mf": cls.MEAN_FIELD, "meanfield": cls.MEAN_FIELD, "mean_field": cls.MEAN_FIELD,
            "lbp": cls.LOOPY_BP, "loopybp": cls.LOOPY_BP, "loopy_bp": cls.LOOPY_BP,
            "damped": cls.DAMPED_BP, "dampedbp": cls.DAMPED_BP, "damped_bp": cls.DAMPED_BP,
            "double_loop": cls.DAMPED_BP,
            "trbp": cls.TRBP, "tree_reweighted": cls.TRBP,
        }
        if key not in aliases:
            valid = ", ".join(e.value for e in cls)
            raise ValueError(f"unknown engine {name!r}; valid engines: {valid}")
        return aliases[key]

    @property
    def uses_messages(self) -> bool:
        return self is not EngineKind.MEAN_FIELD


def weight_shapes(engine: EngineKind, d: int, p: int) -> dict[str, tuple[int, int]]:
    """Ordered name -> shape map of the embedding matrices for an engine."""
    engine = EngineKind.parse(engine)
    dp, dd = (d, p), (d, d)
    if engine is EngineKind.MEAN_FIELD:
        return {"W1": dp, "W2": dd}
    if engine is EngineKind.LOOPY_BP:
        return {"W1": dp, "W2": dd, "W3": dp, "W4": dd}
    if engine is EngineKind.DAMPED_BP:
        return {"W1": dp, "W2": dd, "W3": dd, "W4": dd, "W5": dp, "W6": dd, "W7": dd}
    if engine is EngineKind.TRBP:
        return {"W1": dp, "W2": dd, "W3": dd, "W4": dp, "W5": dd}
    raise ValueError(engine)


@dataclass
class EmbedParams:
    engine: EngineKind
    T: int
    weights: dict[str, np.ndarray]

    def __post_init__(self):
        self.engine = EngineKind.parse(self.engine)
        if self.T < 1:
            raise ValueError("T must be >= 1")
        expected = weight_shapes(self.engine, self.d, self.p)
        if list(self.weights) != list(expected):
            raise ShapeError(f"{self.engine.value} expects matrices {list(expected)}, got {list(self.weights)}")
        for name, shape in expected.items():
            if self.weights[name].shape != shape:
                raise ShapeError(f"{name} has shape {self.weights[name].shape}, expected {shape}")
            check_finite(self.weights[name], name)

    @property
    def d(self) -> int:
        return self.weights["W1"].shape[0]

    @property
    def p(self) -> int:
        return self.weights["W1"].shape[1]

    @classmethod
    def zeros(cls, engine, d: int, p: int, T: int) -> "EmbedParams":
        engine = EngineKind.parse(engine)
        return cls(engine, T, {k: np.zeros(s) for k, s in weight_shapes(engine, d, p).items()})


@dataclass
class EmbeddingState:
    """Every round of an unrolled forward pass.

    ``mu[t]`` are node embeddings (V x d) and ``nu[t]`` directed-edge messages
    (2E x d), index 0 being the all-zero start. For the BP engines with a
    separate readout, ``mu`` holds just ``[0, readout]``. ``pre`` holds the
    ReLU preactivations and ``agg`` the aggregated inputs, keyed by role.
    """

    engine: EngineKind
    mu: list[np.ndarray]
    nu: list[np.ndarray] = field(default_factory=list)
    pre: dict[str, list[np.ndarray]] = field(default_factory=dict)
    agg: dict[str, list[np.ndarray]] = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.mu[-1]

    @property
    def T(self) -> int:
        return len(self.nu) - 1 if self.nu else len(self.mu) - 1

    def preactivations(self) -> list[np.ndarray]:
        return [a for key in sorted(self.pre) for a in self.pre[key] if a is not None]


def _forward_mf(batch: GraphBatch, w, T: int, neighbor_scale: float = 1.0) -> EmbeddingState:
    X = batch.X
    base = X @ w["W1"].T
    mu = [np.zeros((batch.num_nodes, w["W1"].shape[0]))]
    pres, aggs = [None], [None]
    for _ in range(T):
        agg = batch.neighbor_sum.apply(mu[-1])
        if neighbor_scale != 1.0:
            agg = neighbor_scale * agg
        pre = base + agg @ w["W2"].T
        mu.append(relu(pre))
        pres.append(pre)
        aggs.append(agg)
    return EmbeddingState(EngineKind.MEAN_FIELD, mu, pre={"mu": pres}, agg={"mu": aggs})


def _forward_lbp(batch: GraphBatch, w, T: int) -> EmbeddingState:
    X = batch.X
    d = w["W1"].shape[0]
    base = (X @ w["W1"].T)[batch.src]
    nu = [np.zeros((batch.num_directed, d))]
    pres, aggs = [None], [None]
    for _ in range(T):
        agg = batch.exclusive_sum.apply(nu[-1])
        pre = base + agg @ w["W2"].T
        nu.append(relu(pre))
        pres.append(pre)
        aggs.append(agg)
    agg_r = batch.incoming_sum.apply(nu[-1])
    pre_r = X @ w["W3"].T + agg_r @ w["W4"].T
    mu = [np.zeros((batch.num_nodes, d)), relu(pre_r)]
    return EmbeddingState(
        EngineKind.LOOPY_BP, mu, nu,
        pre={"nu": pres, "readout": [None, pre_r]},
        agg={"nu": aggs, "readout": [None, agg_r]},
    )


def _forward_damped(batch: GraphBatch, w, T: int) -> EmbeddingState:
    X = batch.X
    d = w["W1"].shape[0]
    src, rev = batch.src, batch.rev
    base_nu = (X @ w["W1"].T)[src]
    base_mu = X @ w["W5"].T
    nu = [np.zeros((batch.num_directed, d))]
    mu = [np.zeros((batch.num_nodes, d))]
    pre_nu, pre_mu, incoming = [None], [None], [None]
    for _ in range(T):
        inc = batch.incoming_sum.apply(nu[-1])
        pn = base_nu + (inc @ w["W2"].T)[src] + nu[-1][rev] @ w["W3"].T + (mu[-1] @ w["W4"].T)[src]
        pm = base_mu + mu[-1] @ w["W6"].T + inc @ w["W7"].T
        nu.append(relu(pn))
        mu.append(relu(pm))
        pre_nu.append(pn)
        pre_mu.append(pm)
        incoming.append(inc)
    return EmbeddingState(
        EngineKind.DAMPED_BP, mu, nu,
        pre={"nu": pre_nu, "mu": pre_mu},
        agg={"incoming": incoming},
    )


def _forward_trbp(batch: GraphBatch, w, T: int) -> EmbeddingState:
    X = batch.X
    d = w["W1"].shape[0]
    v = batch.edge_weight[:, None]
    base = (X @ w["W1"].T)[batch.src]
    nu = [np.zeros((batch.num_directed, d))]
    pres, aggs, revs = [None], [None], [None]
    for _ in range(T):
        agg = batch.exclusive_sum_weighted.apply(nu[-1])
        back = v * nu[-1][batch.rev]
        pre = base + agg @ w["W2"].T + back @ w["W3"].T
        nu.append(relu(pre))
        pres.append(pre)
        aggs.append(agg)
        revs.append(back)
    agg_r = batch.incoming_sum_weighted.apply(nu[-1])
    pre_r = X @ w["W4"].T + agg_r @ w["W5"].T
    mu = [np.zeros((batch.num_nodes, d)), relu(pre_r)]
    return EmbeddingState(
        EngineKind.TRBP, mu, nu,
        pre={"nu": pres, "readout": [None, pre_r]},
        agg={"nu": aggs, "reverse": revs, "readout": [None, agg_r]},
    )


_FORWARD = {
    EngineKind.MEAN_FIELD: _forward_mf,
    EngineKind.LOOPY_BP: _forward_lbp,
    EngineKind.DAMPED_BP: _forward_damped,
    EngineKind.TRBP: _forward_trbp,
}


def embed_batch(batch: GraphBatch, params: EmbedParams) -> EmbeddingState:
    if batch.X.shape[1] != params.p:
        raise ShapeError(f"features have {batch.X.shape[1]} columns, engine expects p={params.p}")
    return _FORWARD[params.engine](batch, params.weights, params.T)


def _single(g: Graph, params: EmbedParams, feats, edge_weights=None) -> GraphBatch:
    if feats is not None:
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or feats.shape != (g.num_nodes, params.p):
            raise ShapeError(f"features shape {feats.shape} != ({g.num_nodes}, {params.p})")
        return GraphBatch([g], params.p, edge_weights=edge_weights, features=[feats])
    return GraphBatch([g], params.p, edge_weights=edge_weights)


def _expect(params: EmbedParams, engine: EngineKind) -> None:
    if params.engine is not engine:
        raise ShapeError(f"{engine.value} forward called with {params.engine.value} parameters")


def mf_forward(g: Graph, params: EmbedParams, feats=None, neighbor_scale: float = 1.0) -> EmbeddingState:
    """Embedded mean field on one graph. ``feats`` defaults to one-hot tags.

    ``neighbor_scale`` multiplies every neighbor sum before W2 is applied.
    """
    _expect(params, EngineKind.MEAN_FIELD)
    return _forward_mf(_single(g, params, feats), params.weights, params.T, neighbor_scale)


def lbp_forward(g: Graph, params: EmbedParams, feats=None) -> EmbeddingState:
    _expect(params, EngineKind.LOOPY_BP)
    return _forward_lbp(_single(g, params, feats), params.weights, params.T)


def damped_forward(g: Graph, params: EmbedParams, feats=None) -> EmbeddingState:
    _expect(params, EngineKind.DAMPED_BP)
    return _forward_damped(_single(g, params, feats), params.weights, params.T)


def trbp_forward(g: Graph, params: EmbedParams, feats=None, weights: Sequence[float] | None = None) -> EmbeddingState:
    """Tree-reweighted BP embedding; ``weights`` has one v in (0, 1] per edge (default all 1)."""
    _expect(params, EngineKind.TRBP)
    if weights is None:
        weights = np.ones(g.num_edges)
    elif len(weights) != g.num_edges:
        raise GraphError(f"need {g.num_edges} edge weights, got {len(weights)}")
    return _forward_trbp(_single(g, params, feats, [weights]), params.weights, params.T)


def pool(state: EmbeddingState, batch: GraphBatch | None = None) -> np.ndarray:
    """Sum the final node embeddings; per graph (G x d) if a batch is given, else one vector."""
    if batch is None:
        out = np.zeros(state.final.shape[1])
        for row in state.final:
            out = out + row
        return out
    return batch.graph_sum.apply(state.final)


def spanning_tree_weights(g: Graph) -> np.ndarray:
    """Edge appearance probabilities under the uniform spanning-tree measure.

    For each edge this is the effective resistance between its endpoints
    (Kirchhoff), computed per connected component from the Laplacian
    pseudo-inverse. Bridges get exactly 1.
    """
    if g.num_edges == 0:
        return np.zeros(0)
    L = np.zeros((g.num_nodes, g.num_nodes))
    for a, b in g.edges:
        L[a, b] -= 1.0
        L[b, a] -= 1.0
        L[a, a] += 1.0
        L[b, b] += 1.0
    Lp = np.linalg.pinv(L)
    out = np.array([Lp[a, a] + Lp[b, b] - 2.0 * Lp[a, b] for a, b in g.edges])
    return np.clip(out, 1e-12, 1.0)
