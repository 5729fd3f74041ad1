"""Spillover networks, edge pruning, Louvain communities and graph export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .gfevd import SpilloverMatrix, summarize


@dataclass(frozen=True)
class Node:
    ticker: str
    subsector: str = ""
    country: str = ""
    node_weight: float = 0.0


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    weight: float


@dataclass(frozen=True)
class SpilloverNetwork:
    """Directed edge j -> i carries ``theta_norm[i, j]`` (spillover from j to i)."""

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    directed: bool = True

    def __post_init__(self):
        names = {n.ticker for n in self.nodes}
        if len(names) != len(self.nodes):
            raise DataError("duplicate node ticker")
        for e in self.edges:
            if e.source == e.target:
                raise DataError("self-loops are not allowed")
            if e.source not in names or e.target not in names:
                raise DataError(f"edge {e.source}->{e.target} references an unknown node")

    @property
    def tickers(self) -> list[str]:
        return [n.ticker for n in self.nodes]

    def node(self, ticker: str) -> Node:
        for n in self.nodes:
            if n.ticker == ticker:
                return n
        raise KeyError(ticker)

    def weight(self, source: str, target: str) -> float | None:
        for e in self.edges:
            if (e.source, e.target) == (source, target) or (
                not self.directed and {e.source, e.target} == {source, target}
            ):
                return e.weight
        return None


def build_network(m: SpilloverMatrix, meta: Mapping[str, object] | None = None) -> SpilloverNetwork:
    """One directed edge per positive off-diagonal entry; node weight = to-others.

    ``meta`` maps each label to an object with ``subsector`` and ``country``
    attributes (e.g. :class:`spillover.panel.AssetMeta`); when given, every
    label must be present.
    """
    labels = list(m.labels)
    if meta is not None:
        missing = [lab for lab in labels if lab not in meta]
        if missing:
            raise DataError(f"labels without metadata: {missing}")
    to_others = summarize(m).to_others
    nodes = []
    for lab, w in zip(labels, to_others):
        info = meta.get(lab) if meta is not None else None
        sub = getattr(info, "subsector", "") if info is not None else ""
        nodes.append(Node(
            ticker=lab,
            subsector=getattr(sub, "value", sub) or "",
            country=getattr(info, "country", "") if info is not None else "",
            node_weight=float(w),
        ))
    t = np.asarray(m.theta_norm, float)
    edges = [
        Edge(labels[j], labels[i], float(t[i, j]))
        for i in range(len(labels))
        for j in range(len(labels))
        if i != j and t[i, j] > 0
    ]
    return SpilloverNetwork(tuple(nodes), tuple(edges), True)


def prune_threshold(weights, q: float = 0.75) -> float:
    """``q``-quantile of |weights| by linear interpolation between order statistics."""
    w = np.abs(np.asarray(weights, float))
    if w.size == 0:
        return 0.0
    return float(np.quantile(w, q, method="linear"))


def prune_edges(net: SpilloverNetwork, q: float = 0.75) -> SpilloverNetwork:
    """Drop edges whose |weight| is strictly below the ``q``-quantile. Nodes are kept."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    if not net.edges:
        return net
    thr = prune_threshold([e.weight for e in net.edges], q)
    kept = tuple(e for e in net.edges if abs(e.weight) >= thr)
    return SpilloverNetwork(net.nodes, kept, net.directed)


def to_undirected(net: SpilloverNetwork) -> SpilloverNetwork:
    """Merge i->j and j->i into one edge whose weight is the sum of those present."""
    if not net.directed:
        return net
    acc: dict[tuple[str, str], float] = {}
    for e in net.edges:
        key = tuple(sorted((e.source, e.target)))
        acc[key] = acc.get(key, 0.0) + e.weight
    edges = tuple(Edge(a, b, w) for (a, b), w in sorted(acc.items()))
    return SpilloverNetwork(net.nodes, edges, False)


@dataclass
class CommunityPartition:
    assignment: dict[str, int]
    modularity: float
    sizes: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.sizes:
            sizes: dict[int, int] = {}
            for c in self.assignment.values():
                sizes[c] = sizes.get(c, 0) + 1
            self.sizes = dict(sorted(sizes.items()))

    def members(self, community: int) -> list[str]:
        return sorted(t for t, c in self.assignment.items() if c == community)

    def communities(self) -> list[list[str]]:
        return [self.members(c) for c in sorted(self.sizes)]


def _adjacency(net: SpilloverNetwork, order: list[str]) -> np.ndarray:
    idx = {t: i for i, t in enumerate(order)}
    A = np.zeros((len(order), len(order)))
    for e in net.edges:
        i, j = idx[e.source], idx[e.target]
        A[i, j] += e.weight
        A[j, i] += e.weight
    return A


def modularity(A: np.ndarray, labels: np.ndarray, resolution: float = 1.0) -> float:
    """Newman modularity of a partition of a symmetric weighted adjacency."""
    two_m = A.sum()
    if two_m <= 0:
        return 0.0
    k = A.sum(axis=1)
    q = 0.0
    for c in np.unique(labels):
        sel = labels == c
        q += A[np.ix_(sel, sel)].sum() / two_m - resolution * (k[sel].sum() / two_m) ** 2
    return float(q)


def _local_moves(A: np.ndarray, resolution: float) -> tuple[np.ndarray, bool]:
    """One Louvain level: greedy node moves in index order until stable."""
    n = A.shape[0]
    k = A.sum(axis=1)
    two_m = A.sum()
    comm = np.arange(n)
    tot = k.copy()
    moved_any = False
    while True:
        moved = False
        for i in range(n):
            ci = comm[i]
            links: dict[int, float] = {}
            for j in np.flatnonzero(A[i]):
                if j != i:
                    links[comm[j]] = links.get(comm[j], 0.0) + A[i, j]
            tot[ci] -= k[i]
            best_c = ci
            best_gain = links.get(ci, 0.0) - resolution * tot[ci] * k[i] / two_m
            for c in sorted(links):
                gain = links[c] - resolution * tot[c] * k[i] / two_m
                if gain > best_gain + 1e-12:
                    best_c, best_gain = c, gain
            tot[best_c] += k[i]
            if best_c != ci:
                comm[i] = best_c
                moved = moved_any = True
        if not moved:
            break
    _, relabeled = np.unique(comm, return_inverse=True)
    return relabeled, moved_any


def louvain(net: SpilloverNetwork, resolution: float = 1.0) -> CommunityPartition:
    """Two-phase Louvain modularity maximization.

    Nodes are swept in sorted-ticker order and candidate communities are
    examined in ascending id order, so the result is deterministic.
    """
    if net.directed:
        net = to_undirected(net)
    order = sorted(net.tickers)
    A = _adjacency(net, order)
    membership = np.arange(len(order))
    if A.sum() <= 0:
        return CommunityPartition({t: i for i, t in enumerate(order)}, 0.0)
    level = A
    while True:
        labels, moved = _local_moves(level, resolution)
        if not moved:
            break
        membership = labels[membership]
        n_c = labels.max() + 1
        P = np.zeros((level.shape[0], n_c))
        P[np.arange(level.shape[0]), labels] = 1.0
        level = P.T @ level @ P
    # canonical ids: communities numbered by their smallest member ticker
    first: dict[int, int] = {}
    for c in membership:
        first.setdefault(int(c), len(first))
    assignment = {t: first[int(c)] for t, c in zip(order, membership)}
    return CommunityPartition(assignment, modularity(A, membership, resolution))


def largest_community(partition: CommunityPartition, node_weights: Mapping[str, float] | None = None) -> list[str]:
    """Community with most nodes; ties by total node weight, then smallest member."""
    node_weights = node_weights or {}

    def key(c):
        members = partition.members(c)
        return (-len(members), -sum(node_weights.get(t, 0.0) for t in members), members[0])

    return partition.members(min(partition.sizes, key=key))


def central_intersection(
    partitions: Sequence[CommunityPartition],
    node_weights: Sequence[Mapping[str, float]] | None = None,
) -> set[str]:
    """Intersect the largest community of each partition."""
    if not partitions:
        return set()
    universe = set(partitions[0].assignment)
    for p in partitions[1:]:
        if set(p.assignment) != universe:
            raise DataError("partitions cover different node sets")
    weights = list(node_weights) if node_weights is not None else [None] * len(partitions)
    out: set[str] | None = None
    for p, w in zip(partitions, weights):
        core = set(largest_community(p, w))
        out = core if out is None else out & core
    return out or set()


def node_weights(net: SpilloverNetwork) -> dict[str, float]:
    return {n.ticker: n.node_weight for n in net.nodes}


# ---------------------------------------------------------------- export


def _sorted(net: SpilloverNetwork):
    nodes = sorted(net.nodes, key=lambda n: n.ticker)
    edges = sorted(net.edges, key=lambda e: (e.source, e.target))
    return nodes, edges


def to_json_dict(net: SpilloverNetwork) -> dict:
    nodes, edges = _sorted(net)
    return {
        "directed": net.directed,
        "nodes": [
            {"ticker": n.ticker, "subsector": n.subsector, "country": n.country, "to_others": n.node_weight}
            for n in nodes
        ],
        "edges": [{"source": e.source, "target": e.target, "weight": e.weight} for e in edges],
    }


def from_json_dict(data: dict) -> SpilloverNetwork:
    nodes = tuple(
        Node(d["ticker"], d.get("subsector", ""), d.get("country", ""), float(d.get("to_others", 0.0)))
        for d in data["nodes"]
    )
    edges = tuple(Edge(d["source"], d["target"], float(d["weight"])) for d in data["edges"])
    return SpilloverNetwork(nodes, edges, bool(data["directed"]))


def read_graph_json(path: str | Path) -> SpilloverNetwork:
    return from_json_dict(json.loads(Path(path).read_text()))


def _dot_id(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(net: SpilloverNetwork) -> str:
    nodes, edges = _sorted(net)
    arrow = "->" if net.directed else "--"
    lines = [("digraph" if net.directed else "graph") + " spillover {"]
    for n in nodes:
        lines.append(
            f"  {_dot_id(n.ticker)} [subsector={_dot_id(n.subsector)}, country={_dot_id(n.country)}, "
            f"to_others={n.node_weight!r}];"
        )
    for e in edges:
        lines.append(f"  {_dot_id(e.source)} {arrow} {_dot_id(e.target)} [weight={e.weight!r}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_networkx(net: SpilloverNetwork):
    import networkx as nx

    g = nx.DiGraph() if net.directed else nx.Graph()
    nodes, edges = _sorted(net)
    for n in nodes:
        g.add_node(n.ticker, subsector=n.subsector, country=n.country, to_others=n.node_weight)
    for e in edges:
        g.add_edge(e.source, e.target, weight=e.weight)
    return g


def export_graph(net: SpilloverNetwork, path: str | Path, fmt: str = "graphml") -> Path:
    """Write ``net`` as GraphML, DOT or JSON with sorted, reproducible ordering."""
    path = Path(path)
    fmt = fmt.lower()
    if fmt == "json":
        path.write_text(json.dumps(to_json_dict(net), indent=2) + "\n")
    elif fmt == "dot":
        path.write_text(to_dot(net))
    elif fmt == "graphml":
        import networkx as nx

        nx.write_graphml(to_networkx(net), path)
    else:
        raise ValueError(f"unknown graph format {fmt!r}")
    return path
