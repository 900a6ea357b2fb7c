"""Seeded synthetic datasets for end-to-end checks."""
from __future__ import annotations

import itertools

import numpy as np

from .dataio import Dataset
from .graph import from_edge_list, permute
from .head import TaskKind


def _shuffled(g, rng):
    return permute(g, rng.permutation(g.num_nodes))


def cycles_vs_paths(n: int, seed: int, v_min: int = 6, v_max: int = 12, num_tags: int = 1) -> Dataset:
    """Binary task: label 1 for a cycle C_V, 0 for a path P_V; classes alternate, V uniform in [v_min, v_max].

    Node tags are drawn uniformly from ``num_tags`` values and carry no label information.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(n):
        V = int(rng.integers(v_min, v_max + 1))
        label = i % 2
        edges = [(t, t + 1) for t in range(V - 1)] + ([(V - 1, 0)] if label == 1 else [])
        tags = rng.integers(0, num_tags, V).tolist()
        graphs.append(_shuffled(from_edge_list(V, edges, tags, label, num_tags), rng))
    return Dataset(graphs, TaskKind.classification(2), num_tags, "cycles_vs_paths", [0, 1])


def _has_triangle(V: int, edges) -> bool:
    adj = [set() for _ in range(V)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return any(adj[a] & adj[b] for a, b in edges)


def triangle_detection(n: int, seed: int, v_min: int = 6, v_max: int = 12, edge_prob: float = 0.25) -> Dataset:
    """Binary task: does a G(V, p) random graph contain a triangle? Classes are balanced by rejection."""
    rng = np.random.default_rng(seed)
    graphs = []
    while len(graphs) < n:
        want = len(graphs) % 2
        V = int(rng.integers(v_min, v_max + 1))
        edges = [(a, b) for a, b in itertools.combinations(range(V), 2) if rng.random() < edge_prob]
        if int(_has_triangle(V, edges)) != want:
            continue
        graphs.append(from_edge_list(V, edges, [0] * V, want, 1))
    return Dataset(graphs, TaskKind.classification(2), 1, "triangles", [0, 1])


def random_tree(V: int, rng: np.random.Generator, num_tags: int = 1, label=0):
    """Random recursive tree: in shuffled order, each node attaches to a uniformly chosen earlier node."""
    order = rng.permutation(V)
    edges = [(int(order[i]), int(order[rng.integers(0, i)])) for i in range(1, V)]
    return from_edge_list(V, edges, rng.integers(0, num_tags, V).tolist(), label, num_tags)


def random_graph(V: int, rng: np.random.Generator, num_tags: int = 1, edge_prob: float = 0.3, label=0):
    edges = [(a, b) for a, b in itertools.combinations(range(V), 2) if rng.random() < edge_prob]
    return from_edge_list(V, edges, rng.integers(0, num_tags, V).tolist(), label, num_tags)


def motif_strings(n: int, seed: int, alphabet: str = "ACGT", length: int = 20, motif: str = "GATA") -> list[tuple[int, str]]:
    """``(label, sequence)`` pairs; label 1 iff the motif occurs. Balanced by planting it in odd rows."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        while True:
            s = "".join(rng.choice(list(alphabet), size=length))
            if i % 2 == 1:
                at = int(rng.integers(0, length - len(motif) + 1))
                s = s[:at] + motif + s[at + len(motif):]
            if (motif in s) == bool(i % 2):
                break
        rows.append((i % 2, s))
    return rows
