"""Graph data model: one structured datum as a pairwise latent-variable topology.

Strings become chains (one node per position, consecutive positions linked);
general graphs keep their own edge set. Node attributes are categorical tags,
encoded one-hot when fed to an embedding engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

Target = Union[int, float]


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    node_tag: tuple[int, ...]
    label: Target = 0
    adjacency: tuple[tuple[int, ...], ...] = field(default=(), compare=False, repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]


class Alphabet:
    """Ordered set of distinct tokens; token index is its position."""

    def __init__(self, symbols: Iterable[str]):
        self.symbols = tuple(symbols)
        self._index = {}
        for i, s in enumerate(self.symbols):
            if s in self._index:
                raise GraphError(f"duplicate alphabet symbol {s!r}")
            self._index[s] = i

    @classmethod
    def from_data(cls, sequences: Iterable[str]) -> "Alphabet":
        return cls(sorted({ch for s in sequences for ch in s}))

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, token) -> bool:
        return token in self._index

    def __repr__(self) -> str:
        return f"Alphabet({''.join(self.symbols)!r})" if all(len(s) == 1 for s in self.symbols) else f"Alphabet({self.symbols!r})"

    def lookup(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise GraphError(f"unknown token {token!r}") from None


def from_edge_list(
    num_nodes: int,
    edges: Iterable[Sequence[int]],
    tags: Sequence[int],
    label: Target = 0,
    num_tags: int | None = None,
) -> Graph:
    """Canonicalize an edge list: dedupe reversed/repeated pairs, sort, build adjacency."""
    if num_nodes < 1:
        raise GraphError("a graph needs at least one node")
    if len(tags) != num_nodes:
        raise GraphError(f"got {len(tags)} tags for {num_nodes} nodes")
    for i, t in enumerate(tags):
        if t < 0 or (num_tags is not None and t >= num_tags):
            raise GraphError(f"tag {t} of node {i} outside [0, {num_tags})")
    canon = set()
    for e in edges:
        a, b = int(e[0]), int(e[1])
        if a == b:
            raise GraphError(f"self-loop at node {a}")
        for v in (a, b):
            if v < 0 or v >= num_nodes:
                raise GraphError(f"edge endpoint {v} outside [0, {num_nodes})")
        canon.add((a, b) if a < b else (b, a))
    edge_tuple = tuple(sorted(canon))
    adj: list[list[int]] = [[] for _ in range(num_nodes)]
    for a, b in edge_tuple:
        adj[a].append(b)
        adj[b].append(a)
    return Graph(
        num_nodes=num_nodes,
        edges=edge_tuple,
        node_tag=tuple(int(t) for t in tags),
        label=label,
        adjacency=tuple(tuple(sorted(a)) for a in adj),
    )


def string_to_chain(s: Sequence[str], alphabet: Alphabet, label: Target = 0) -> Graph:
    if len(s) < 1:
        raise GraphError("empty sequence")
    tags = []
    for pos, tok in enumerate(s):
        if tok not in alphabet:
            raise GraphError(f"unknown token {tok!r} at position {pos}")
        tags.append(alphabet.lookup(tok))
    n = len(tags)
    return from_edge_list(n, [(t, t + 1) for t in range(n - 1)], tags, label, len(alphabet))


def one_hot(tag: int, num_tags: int) -> np.ndarray:
    if tag < 0 or tag >= num_tags:
        raise GraphError(f"tag {tag} outside [0, {num_tags})")
    out = np.zeros(num_tags)
    out[tag] = 1.0
    return out


def node_features(g: Graph, num_tags: int) -> np.ndarray:
    """One-hot feature matrix, one row per node."""
    X = np.zeros((g.num_nodes, num_tags))
    tags = np.asarray(g.node_tag, dtype=np.int64)
    if tags.size and (tags.max() >= num_tags):
        raise GraphError(f"tag {int(tags.max())} outside [0, {num_tags})")
    X[np.arange(g.num_nodes), tags] = 1.0
    return X


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel nodes so that new node ``i`` is old node ``perm[i]``."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(g.num_nodes)):
        raise GraphError("permutation is not a bijection on the node set")
    inv = [0] * g.num_nodes
    for new, old in enumerate(perm):
        inv[old] = new
    tags = [g.node_tag[perm[i]] for i in range(g.num_nodes)]
    edges = [(inv[a], inv[b]) for a, b in g.edges]
    return from_edge_list(g.num_nodes, edges, tags, g.label)


@dataclass(frozen=True)
class DirectedIndex:
    """Two directed slots per undirected edge: slot ``2e`` is (i->j), ``2e+1`` is (j->i) with i<j."""

    src: np.ndarray
    dst: np.ndarray
    incoming: tuple[tuple[int, ...], ...]
    outgoing: tuple[tuple[int, ...], ...]

    @property
    def num_directed(self) -> int:
        return int(self.src.shape[0])

    @staticmethod
    def reverse(e: int) -> int:
        return e ^ 1

    def reverse_all(self) -> np.ndarray:
        return np.arange(self.num_directed) ^ 1


def directed_edge_index(g: Graph) -> DirectedIndex:
    src = np.empty(2 * g.num_edges, dtype=np.int64)
    dst = np.empty(2 * g.num_edges, dtype=np.int64)
    for e, (a, b) in enumerate(g.edges):
        src[2 * e], dst[2 * e] = a, b
        src[2 * e + 1], dst[2 * e + 1] = b, a
    incoming: list[list[int]] = [[] for _ in range(g.num_nodes)]
    outgoing: list[list[int]] = [[] for _ in range(g.num_nodes)]
    for e in range(src.shape[0]):
        incoming[dst[e]].append(e)
        outgoing[src[e]].append(e)
    return DirectedIndex(
        src=src,
        dst=dst,
        incoming=tuple(tuple(sorted(lst, key=lambda e: (src[e], e))) for lst in incoming),
        outgoing=tuple(tuple(sorted(lst, key=lambda e: (dst[e], e))) for lst in outgoing),
    )
