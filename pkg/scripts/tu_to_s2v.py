"""Convert a TU-Dortmund graph-kernel dataset directory into the s2v graph text format.

Usage: python scripts/tu_to_s2v.py <dir-with-DS_*.txt> <DS> <out.txt>
"""
import sys
from collections import defaultdict
from pathlib import Path


def convert(root: Path, name: str, out: Path) -> None:
    def col(suffix):
        return [ln.strip() for ln in (root / f"{name}_{suffix}.txt").read_text().splitlines() if ln.strip()]

    indicator = [int(v) for v in col("graph_indicator")]
    node_tags = [int(v) for v in col("node_labels")]
    graph_labels = col("graph_labels")
    local = {}
    members = defaultdict(list)
    for node, gid in enumerate(indicator, start=1):
        local[node] = len(members[gid])
        members[gid].append(node)
    adj = defaultdict(set)
    for ln in col("A"):
        a, b = (int(t) for t in ln.split(","))
        adj[a].add(b)
    lines = [str(len(graph_labels))]
    for gid, label in enumerate(graph_labels, start=1):
        nodes = members[gid]
        lines.append(f"{len(nodes)} {label}")
        for node in nodes:
            nbrs = sorted(local[m] for m in adj[node])
            lines.append(" ".join(str(v) for v in [node_tags[node - 1], len(nbrs), *nbrs]))
    out.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    convert(Path(sys.argv[1]), sys.argv[2], Path(sys.argv[3]))
