"""Finite undirected graphs with per-edge weights.

Vertices are the dense integers ``0..n-1``. A :class:`Graph` is validated on
construction (no loops, no duplicate edges, connected, positive weights) and
is immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx


class GraphError(ValueError):
    """Raised when a graph violates the structural invariants."""


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    bridge: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "bridge": list(self.bridge) if self.bridge else None}


@dataclass(frozen=True)
class Graph:
    """Connected simple graph on ``vertex_count`` vertices.

    ``edges`` holds normalized pairs ``(i, j)`` with ``i < j`` in ascending
    order; ``weights`` maps each of them to a strictly positive float.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    weights: dict[tuple[int, int], float] = field(compare=False, repr=False)
    _adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _ordered: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)
    _ordered_index: dict[tuple[int, int], int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = self.vertex_count
        if not isinstance(n, int) or n < 1:
            raise GraphError(f"vertex_count must be a positive integer, got {n!r}")
        adj: list[set[int]] = [set() for _ in range(n)]
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"loop at vertex {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge {(i, j)} out of range for {n} vertices")
            adj[i].add(j)
            adj[j].add(i)
        for e in self.edges:
            w = self.weights.get(e)
            if w is None or not w > 0:
                raise GraphError(f"edge {e} needs a strictly positive weight, got {w!r}")
        adjacency = tuple(tuple(sorted(a)) for a in adj)
        seen = {0}
        stack = [0]
        while stack:
            for u in adjacency[stack.pop()]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        if len(seen) != n:
            missing = sorted(set(range(n)) - seen)
            raise GraphError(f"graph is disconnected; unreachable from 0: {missing}")
        ordered = tuple((i, j) for i in range(n) for j in adjacency[i])
        object.__setattr__(self, "_adjacency", adjacency)
        object.__setattr__(self, "_ordered", ordered)
        object.__setattr__(self, "_ordered_index", {p: k for k, p in enumerate(ordered)})

    @classmethod
    def from_edges(
        cls,
        vertex_count: int,
        edges: Iterable[tuple[int, int] | tuple[int, int, float]],
    ) -> "Graph":
        """Build a graph from ``(i, j)`` or ``(i, j, W)`` triples (W defaults to 1.0)."""
        normalized: dict[tuple[int, int], float] = {}
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise GraphError(f"loop at vertex {i}")
            key = (min(i, j), max(i, j))
            if key in normalized:
                raise GraphError(f"duplicate edge {key}")
            normalized[key] = w
        return cls(vertex_count, tuple(sorted(normalized)), normalized)

    @property
    def ordered_edges(self) -> tuple[tuple[int, int], ...]:
        """All ordered adjacent pairs ``(i, j)``, sorted lexicographically."""
        return self._ordered

    def ordered_index(self, i: int, j: int) -> int:
        try:
            return self._ordered_index[(i, j)]
        except KeyError:
            raise GraphError(f"vertices {i} and {j} are not adjacent") from None

    def neighbors(self, v: int) -> tuple[int, ...]:
        if not 0 <= v < self.vertex_count:
            raise GraphError(f"vertex {v} out of range [0, {self.vertex_count})")
        return self._adjacency[v]

    def adjacent(self, i: int, j: int) -> bool:
        return (i, j) in self._ordered_index

    def weight(self, i: int, j: int) -> float:
        if not self.adjacent(i, j):
            raise GraphError(f"vertices {i} and {j} are not adjacent")
        return self.weights[(min(i, j), max(i, j))]

    @property
    def max_degree(self) -> int:
        return max(len(a) for a in self._adjacency)

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(self.vertex_count))
        G.add_edges_from(self.edges)
        return G

    def to_json(self) -> dict:
        return {
            "vertices": self.vertex_count,
            "edges": [[i, j, self.weights[(i, j)]] for i, j in self.edges],
        }


def neighbors(g: Graph, v: int) -> list[int]:
    return list(g.neighbors(v))


def validate_strongly_connected(g: Graph) -> ValidationReport:
    """Check that every edge lies on a cycle, i.e. that ``g`` has no bridge.

    On failure the lexicographically smallest bridge is reported.
    """
    bridges = sorted(tuple(sorted(b)) for b in nx.bridges(g.to_networkx()))
    if bridges:
        return ValidationReport(False, bridges[0])
    return ValidationReport(True)


def complete_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(n, [(i, j, weight) for i in range(n) for j in range(i + 1, n)])


def cycle_graph(n: int, weight: float = 1.0) -> Graph:
    if n < 3:
        raise GraphError("a cycle needs at least 3 vertices")
    return Graph.from_edges(n, [(i, (i + 1) % n, weight) for i in range(n)])


def path_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph.from_edges(n, [(i, i + 1, weight) for i in range(n - 1)])
