"""Sparse neighbor aggregation over a batch of graphs.

A minibatch is embedded as the disjoint union of its graphs, so one set of
index arrays drives every engine. Aggregations are padded gather-sums: row
``r`` of ``op.apply(x)`` is ``sum_k w[r, k] * x[idx[r, k]]`` with ``k`` running
left to right over source ids sorted ascending, so results are reproducible.
"""
from __future__ import annotations

from functools import cached_property
from typing import Sequence

import numpy as np

from .graph import Graph, GraphError, directed_edge_index, node_features


class GatherSum:
    """Row-wise weighted sum of gathered rows; the padding slot points at a zero row."""

    def __init__(self, idx: np.ndarray, n_src: int, weight: np.ndarray | None = None):
        self.idx = idx
        self.n_src = n_src
        self.weight = weight

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], n_src: int, weights=None) -> "GatherSum":
        width = max((len(r) for r in rows), default=0)
        idx = np.full((len(rows), width), n_src, dtype=np.int64)
        w = None if weights is None else np.zeros((len(rows), width))
        for r, cols in enumerate(rows):
            idx[r, : len(cols)] = cols
            if w is not None:
                w[r, : len(cols)] = weights[r]
        return cls(idx, n_src, w)

    @property
    def n_rows(self) -> int:
        return self.idx.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.n_src:
            raise ValueError(f"operator expects {self.n_src} source rows, got {x.shape[0]}")
        if self.idx.shape[1] == 0:
            return np.zeros((self.n_rows,) + x.shape[1:])
        padded = np.concatenate([x, np.zeros((1,) + x.shape[1:])], axis=0)
        g = padded[self.idx]
        if self.weight is not None:
            g = g * self.weight[..., None]
        return g.sum(axis=1)

    def transpose(self) -> "GatherSum":
        rows: list[list[int]] = [[] for _ in range(self.n_src)]
        ws: list[list[float]] = [[] for _ in range(self.n_src)]
        for r in range(self.n_rows):
            for k in range(self.idx.shape[1]):
                c = int(self.idx[r, k])
                if c == self.n_src:
                    continue
                rows[c].append(r)
                ws[c].append(1.0 if self.weight is None else float(self.weight[r, k]))
        return GatherSum.from_rows(rows, self.n_rows, None if self.weight is None else ws)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_src + 1))
        for r in range(self.n_rows):
            for k in range(self.idx.shape[1]):
                out[r, self.idx[r, k]] += 1.0 if self.weight is None else self.weight[r, k]
        return out[:, : self.n_src]


class GraphBatch:
    """Disjoint union of graphs with node features and directed-edge bookkeeping.

    ``edge_weights`` (TRBP only) gives one sequence per graph with a weight per
    undirected edge in ``graph.edges`` order.
    """

    def __init__(self, graphs: Sequence[Graph], num_tags: int, edge_weights=None, features=None):
        if not graphs:
            raise GraphError("empty graph batch")
        self.graphs = list(graphs)
        self.num_tags = num_tags
        sizes = [g.num_nodes for g in self.graphs]
        self.node_offset = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.num_nodes = int(self.node_offset[-1])
        self.node_graph = np.repeat(np.arange(len(self.graphs)), sizes)

        if features is None:
            self.X = np.concatenate([node_features(g, num_tags) for g in self.graphs], axis=0)
        else:
            self.X = np.concatenate([np.asarray(f, dtype=np.float64) for f in features], axis=0)
            if self.X.shape != (self.num_nodes, num_tags):
                raise GraphError(f"feature matrix {self.X.shape} != ({self.num_nodes}, {num_tags})")

        src, dst, nbr_rows, in_rows, out_rows = [], [], [], [], []
        vw = []
        e_off = 0
        for gi, g in enumerate(self.graphs):
            off = int(self.node_offset[gi])
            di = directed_edge_index(g)
            src.append(di.src + off)
            dst.append(di.dst + off)
            nbr_rows.extend([[off + j for j in g.adjacency[i]] for i in range(g.num_nodes)])
            in_rows.extend([[e_off + e for e in di.incoming[i]] for i in range(g.num_nodes)])
            out_rows.extend([[e_off + e for e in di.outgoing[i]] for i in range(g.num_nodes)])
            if edge_weights is not None:
                w = np.asarray(edge_weights[gi], dtype=np.float64)
                if w.shape != (g.num_edges,):
                    raise GraphError(f"graph {gi}: expected {g.num_edges} edge weights, got {w.shape}")
                if np.any(~(w > 0.0)) or np.any(w > 1.0):
                    raise GraphError(f"graph {gi}: edge weights must lie in (0, 1]")
                vw.append(np.repeat(w, 2))
            e_off += di.num_directed
        self.src = np.concatenate(src).astype(np.int64)
        self.dst = np.concatenate(dst).astype(np.int64)
        self.num_directed = int(self.src.shape[0])
        self.rev = np.arange(self.num_directed) ^ 1
        self.edge_weight = np.concatenate(vw) if edge_weights is not None else np.ones(self.num_directed)
        self._nbr_rows = nbr_rows
        self._in_rows = in_rows
        self._out_rows = out_rows

    @property
    def num_graphs(self) -> int:
        return len(self.graphs)

    @cached_property
    def neighbor_sum(self) -> GatherSum:
        """V <- V: sum of neighbor node rows (symmetric, so it is its own transpose)."""
        return GatherSum.from_rows(self._nbr_rows, self.num_nodes)

    @cached_property
    def incoming_sum(self) -> GatherSum:
        """V <- 2E: sum of messages arriving at each node."""
        return GatherSum.from_rows(self._in_rows, self.num_directed)

    @cached_property
    def incoming_sum_weighted(self) -> GatherSum:
        ws = [[self.edge_weight[e] for e in row] for row in self._in_rows]
        return GatherSum.from_rows(self._in_rows, self.num_directed, ws)

    @cached_property
    def outgoing_sum(self) -> GatherSum:
        """V <- 2E: sum of messages leaving each node (transpose of gathering at ``src``)."""
        return GatherSum.from_rows(self._out_rows, self.num_directed)

    def _exclusive_rows(self):
        rows = []
        for e in range(self.num_directed):
            back = e ^ 1
            rows.append([k for k in self._in_rows[self.src[e]] if k != back])
        return rows

    @cached_property
    def exclusive_sum(self) -> GatherSum:
        """2E <- 2E: for e=(i->j), sum of messages (k->i) over k in N(i) minus j."""
        return GatherSum.from_rows(self._exclusive_rows(), self.num_directed)

    @cached_property
    def exclusive_sum_T(self) -> GatherSum:
        return self.exclusive_sum.transpose()

    @cached_property
    def exclusive_sum_weighted(self) -> GatherSum:
        rows = self._exclusive_rows()
        ws = [[self.edge_weight[k] for k in row] for row in rows]
        return GatherSum.from_rows(rows, self.num_directed, ws)

    @cached_property
    def exclusive_sum_weighted_T(self) -> GatherSum:
        return self.exclusive_sum_weighted.transpose()

    @cached_property
    def graph_sum(self) -> GatherSum:
        """G <- V: per-graph sum of node rows in ascending node order."""
        rows = [list(range(int(self.node_offset[g]), int(self.node_offset[g + 1]))) for g in range(self.num_graphs)]
        return GatherSum.from_rows(rows, self.num_nodes)
