"""Dataset loading (graph and string text formats), splits, and cross-validation folds.

Graph format (whitespace separated, LF or CRLF)::

    N                       # number of graphs
    V label                 # per graph: node count and graph label
    tag k n_1 ... n_k       # V lines: node tag, degree, 0-based neighbor ids

Adjacency must be listed in both directions. Extra tokens after the ``k``
neighbor ids (edge attributes) are rejected.

String format: one ``label<TAB>sequence`` per line; every character of the
sequence is a token.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import Alphabet, Graph, from_edge_list, string_to_chain
from .head import TaskKind


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    graphs: list[Graph]
    task: TaskKind
    num_tags: int
    name: str = ""
    label_values: list = field(default_factory=list)
    alphabet: Alphabet | None = None

    def __post_init__(self):
        if not self.graphs:
            raise DataError("dataset is empty")
        for i, g in enumerate(self.graphs):
            if g.node_tag and max(g.node_tag) >= self.num_tags:
                raise DataError(f"graph {i}: tag {max(g.node_tag)} >= tag count {self.num_tags}")
            if self.task.is_classification and not 0 <= int(g.label) < self.task.K:
                raise DataError(f"graph {i}: class {g.label} outside [0, {self.task.K})")

    def __len__(self) -> int:
        return len(self.graphs)

    def targets(self, indices=None) -> np.ndarray:
        idx = range(len(self.graphs)) if indices is None else indices
        dtype = np.int64 if self.task.is_classification else np.float64
        return np.array([self.graphs[i].label for i in idx], dtype=dtype)

    def subset(self, indices) -> "Dataset":
        return Dataset([self.graphs[i] for i in indices], self.task, self.num_tags, self.name,
                       list(self.label_values), self.alphabet)


def _is_int(tok: str) -> bool:
    try:
        int(tok)
        return True
    except ValueError:
        return False


def _labels_to_task(raw: list[str], task: str, where: str):
    if task == "auto":
        task = "classification" if all(_is_int(t) for t in raw) else "regression"
    if task == "classification":
        try:
            ints = [int(t) for t in raw]
        except ValueError as exc:
            raise DataError(f"{where}: non-integer class label ({exc})") from None
        values = sorted(set(ints))
        index = {v: i for i, v in enumerate(values)}
        return TaskKind.classification(max(2, len(values))), [index[v] for v in ints], values
    if task == "regression":
        try:
            vals = [float(t) for t in raw]
        except ValueError as exc:
            raise DataError(f"{where}: bad regression target ({exc})") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"{where}: non-finite regression target")
        return TaskKind.regression(), vals, []
    raise DataError(f"unknown task {task!r}")


def parse_graph_text(text: str, name: str = "", task: str = "auto", num_tags: int | None = None) -> Dataset:
    lines = [(no, ln.split()) for no, ln in enumerate(text.splitlines(), start=1)]
    lines = [(no, toks) for no, toks in lines if toks]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise DataError(f"{name}: unexpected end of file")
        pos += 1
        return lines[pos - 1]

    no, toks = take()
    if len(toks) != 1 or not _is_int(toks[0]) or int(toks[0]) < 1:
        raise DataError(f"{name}:{no}: expected graph count, got {' '.join(toks)!r}")
    n_graphs = int(toks[0])
    raw_graphs = []
    for gi in range(n_graphs):
        no, toks = take()
        if len(toks) != 2 or not _is_int(toks[0]) or int(toks[0]) < 1:
            raise DataError(f"{name}:{no}: expected 'V label' header for graph {gi}")
        V, raw_label = int(toks[0]), toks[1]
        tags, directed = [], set()
        for i in range(V):
            no, toks = take()
            if len(toks) < 2 or not all(_is_int(t) for t in toks):
                raise DataError(f"{name}:{no}: expected 'tag k n_1 .. n_k' for node {i} of graph {gi}")
            tag, k = int(toks[0]), int(toks[1])
            if k < 0 or len(toks) < 2 + k:
                raise DataError(f"{name}:{no}: node {i} declares {k} neighbors but lists {len(toks) - 2}")
            if len(toks) > 2 + k:
                raise DataError(f"{name}:{no}: extra tokens after neighbor list (edge attributes are not supported)")
            if tag < 0 or (num_tags is not None and tag >= num_tags):
                raise DataError(f"{name}:{no}: tag {tag} outside [0, {num_tags})")
            tags.append(tag)
            for tok in toks[2:]:
                j = int(tok)
                if j < 0 or j >= V:
                    raise DataError(f"{name}:{no}: neighbor {j} of node {i} outside [0, {V})")
                if j == i:
                    raise DataError(f"{name}:{no}: self-loop at node {i}")
                directed.add((i, j))
        for i, j in sorted(directed):
            if (j, i) not in directed:
                raise DataError(f"{name}: graph {gi}: node {i} lists neighbor {j} but node {j} does not list {i}")
        raw_graphs.append((V, tags, sorted(directed), raw_label))
    if pos != len(lines):
        raise DataError(f"{name}:{lines[pos][0]}: trailing content after {n_graphs} graphs")

    task_kind, labels, values = _labels_to_task([r[3] for r in raw_graphs], task, name)
    L = num_tags if num_tags is not None else 1 + max(t for r in raw_graphs for t in r[1])
    graphs = [from_edge_list(V, edges, tags, lab, L) for (V, tags, edges, _), lab in zip(raw_graphs, labels)]
    return Dataset(graphs, task_kind, L, name, values)


def load_graph_dataset(path, task: str = "auto", num_tags: int | None = None) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return parse_graph_text(text, path.stem, task, num_tags)


def format_graph_dataset(ds: Dataset) -> str:
    out = [str(len(ds.graphs))]
    for g in ds.graphs:
        if ds.task.is_classification and ds.label_values:
            label = ds.label_values[int(g.label)]
        else:
            label = repr(float(g.label)) if not ds.task.is_classification else int(g.label)
        out.append(f"{g.num_nodes} {label}")
        for i in range(g.num_nodes):
            nb = g.adjacency[i]
            out.append(" ".join(str(v) for v in (g.node_tag[i], len(nb), *nb)))
    return "\n".join(out) + "\n"


def write_atomic(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_atomic_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_graph_dataset(ds: Dataset, path) -> None:
    write_atomic(path, format_graph_dataset(ds))


def load_string_dataset(path, alphabet: Alphabet | str | None = None, task: str = "auto") -> Dataset:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    rows = []
    for no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise DataError(f"{path.name}:{no}: expected 'label<TAB>sequence'")
        label, seq = line.split("\t", 1)
        seq = seq.strip()
        if not seq:
            raise DataError(f"{path.name}:{no}: empty sequence")
        rows.append((no, label.strip(), seq))
    if not rows:
        raise DataError(f"{path.name}: no sequences")
    if alphabet is None:
        alphabet = Alphabet.from_data(r[2] for r in rows)
    elif isinstance(alphabet, str):
        alphabet = Alphabet(alphabet)
    task_kind, labels, values = _labels_to_task([r[1] for r in rows], task, path.name)
    graphs = []
    for (no, _, seq), lab in zip(rows, labels):
        for col, ch in enumerate(seq, start=1):
            if ch not in alphabet:
                raise DataError(f"{path.name}:{no}:{col}: unknown symbol {ch!r}")
        graphs.append(string_to_chain(seq, alphabet, lab))
    return Dataset(graphs, task_kind, len(alphabet), path.stem, values, alphabet)


def bundled_path(name: str) -> Path:
    """Path of a dataset shipped with the package (e.g. ``"MUTAG"``)."""
    ref = resources.files("structure2vec") / "data" / f"{name}.txt"
    return Path(str(ref))


def load_bundled(name: str = "MUTAG") -> Dataset:
    return load_graph_dataset(bundled_path(name))


@dataclass
class FoldPlan:
    k: int
    seed: int
    folds: list[tuple[np.ndarray, np.ndarray]]

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)


def _stratified_order(labels: np.ndarray | None, n: int, rng: np.random.Generator) -> np.ndarray:
    if labels is None:
        return rng.permutation(n)
    parts = [rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)]
    return np.concatenate(parts)


def kfold(dataset: Dataset, k: int, seed: int) -> FoldPlan:
    """Seeded k-fold plan; stratified by class for classification data.

    Classes are laid out one after another in shuffled order and dealt
    round-robin to folds, so each fold holds floor or ceil of n_c/k of every
    class c and fold sizes differ by at most one.
    """
    n = len(dataset)
    if k < 2:
        raise DataError("k must be at least 2")
    if n < k:
        raise DataError(f"cannot make {k} folds from {n} samples")
    labels = dataset.targets() if dataset.task.is_classification else None
    if labels is not None:
        for c in np.unique(labels):
            if np.sum(labels == c) < k:
                warnings.warn(f"class {c} has fewer than {k} samples; stratification is best-effort")
    order = _stratified_order(labels, n, np.random.default_rng(seed))
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k
    folds = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append((train, test))
    return FoldPlan(k, seed, folds)


def split_validation(dataset: Dataset, indices: Sequence[int], fraction: float, seed: int):
    """Carve a (stratified) validation part out of ``indices``; returns (train, val)."""
    indices = np.asarray(indices, dtype=np.int64)
    if fraction <= 0 or indices.size < 2:
        return indices, indices[:0]
    rng = np.random.default_rng(seed)
    labels = dataset.targets(indices) if dataset.task.is_classification else None
    order = _stratified_order(labels, indices.size, rng)
    n_val = max(1, int(round(fraction * indices.size)))
    step = indices.size / n_val
    pick = np.zeros(indices.size, dtype=bool)
    pick[order[(np.arange(n_val) * step).astype(np.int64)]] = True
    return indices[~pick], indices[pick]


@dataclass(frozen=True)
class DatasetStats:
    size: int
    avg_nodes: float
    avg_edges: float
    num_tags: int

    def __str__(self) -> str:
        return (f"size={self.size} avg|V|={self.avg_nodes:.2f} avg|E|={self.avg_edges:.2f} "
                f"#labels={self.num_tags}")


def dataset_stats(dataset: Dataset) -> DatasetStats:
    gs = dataset.graphs
    tags = {t for g in gs for t in g.node_tag}
    return DatasetStats(
        size=len(gs),
        avg_nodes=float(np.mean([g.num_nodes for g in gs])),
        avg_edges=float(np.mean([g.num_edges for g in gs])),
        num_tags=len(tags),
    )

