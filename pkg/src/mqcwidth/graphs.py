"""Simple graphs over qubit indices, graph-state transformations and GF(2) cut-rank.

Adjacency is stored as one Python int per vertex (bit ``u`` of ``rows[v]`` is set
iff ``u`` and ``v`` are adjacent), which keeps GF(2) elimination cheap.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import CapExceededError

__all__ = [
    "Graph",
    "Bipartition",
    "local_complement",
    "delete_vertex",
    "cut_rank",
    "crossing_edges",
    "gf2_rank",
    "path_graph",
    "cycle_graph",
    "star_graph",
    "complete_graph",
    "complete_bipartite_graph",
    "empty_graph",
    "random_bounded_degree_graph",
    "all_graphs",
    "connected_graphs",
]


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of vertices (qubits).
    rows : tuple of int
        Bit-row adjacency, symmetric with zero diagonal.
    """

    n: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        if len(self.rows) != self.n:
            raise ValueError(f"expected {self.n} adjacency rows, got {len(self.rows)}")
        full = (1 << self.n) - 1
        for v, row in enumerate(self.rows):
            if row & ~full:
                raise ValueError(f"row {v} references vertices outside 0..{self.n - 1}")
            if (row >> v) & 1:
                raise ValueError(f"self-loop at vertex {v}")
            for u in _bits(row):
                if not (self.rows[u] >> v) & 1:
                    raise ValueError(f"adjacency not symmetric at ({v}, {u})")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> Graph:
        rows = [0] * n
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            rows[u] |= 1 << v
            rows[v] |= 1 << u
        return cls(n, tuple(rows))

    @classmethod
    def from_networkx(cls, nx_graph) -> Graph:
        nodes = sorted(nx_graph.nodes())
        index = {v: i for i, v in enumerate(nodes)}
        return cls.from_edges(len(nodes), ((index[u], index[v]) for u, v in nx_graph.edges()))

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in _bits(self.rows[u]) if u < v]

    @property
    def num_edges(self) -> int:
        return sum(row.bit_count() for row in self.rows) // 2

    def neighbors(self, v: int) -> list[int]:
        return list(_bits(self.rows[v]))

    def degree(self, v: int) -> int:
        return self.rows[v].bit_count()

    @property
    def max_degree(self) -> int:
        return max((row.bit_count() for row in self.rows), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return bool((self.rows[u] >> v) & 1)

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = 1
        frontier = 1
        while frontier:
            reach = 0
            for v in _bits(frontier):
                reach |= self.rows[v]
            frontier = reach & ~seen
            seen |= frontier
        return seen == self.full_mask

    def adjacency_matrix(self) -> np.ndarray:
        mat = np.zeros((self.n, self.n), dtype=np.uint8)
        for u, v in self.edges():
            mat[u, v] = mat[v, u] = 1
        return mat

    def toggle_edge(self, u: int, v: int) -> Graph:
        rows = list(self.rows)
        rows[u] ^= 1 << v
        rows[v] ^= 1 << u
        return Graph(self.n, tuple(rows))

    def isolate(self, v: int) -> Graph:
        """Drop every edge at ``v`` but keep the vertex (and all indices) in place."""
        _check_vertex(self, v)
        rows = [row & ~(1 << v) for row in self.rows]
        rows[v] = 0
        return Graph(self.n, tuple(rows))

    def induced_on(self, mask: int) -> Graph:
        """Keep only edges with both endpoints in ``mask``; vertex indices unchanged."""
        rows = [(row & mask) if (mask >> v) & 1 else 0 for v, row in enumerate(self.rows)]
        return Graph(self.n, tuple(rows))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges()]}

    @classmethod
    def from_json(cls, data: dict) -> Graph:
        try:
            n = int(data["n"])
            edges = [tuple(int(x) for x in e) for e in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed graph JSON: {exc}") from exc
        seen = set()
        for u, v in edges:
            if u >= v:
                raise ValueError(f"edge [{u}, {v}] must satisfy u < v")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge [{u}, {v}]")
            seen.add((u, v))
        return cls.from_edges(n, edges)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


@dataclass(frozen=True)
class Bipartition:
    """A split of ``range(n)`` into two nonempty sides."""

    side_a: frozenset[int]
    side_b: frozenset[int]

    def __post_init__(self):
        if not self.side_a or not self.side_b:
            raise ValueError("both sides of a bipartition must be nonempty")
        if self.side_a & self.side_b:
            raise ValueError("bipartition sides overlap")

    @classmethod
    def from_side(cls, n: int, side_a: Iterable[int]) -> Bipartition:
        a = frozenset(side_a)
        if any(not 0 <= v < n for v in a):
            raise ValueError(f"side {sorted(a)} not within 0..{n - 1}")
        return cls(a, frozenset(range(n)) - a)

    @classmethod
    def from_mask(cls, n: int, mask: int) -> Bipartition:
        return cls.from_side(n, _bits(mask))

    @property
    def n(self) -> int:
        return len(self.side_a) + len(self.side_b)

    @property
    def mask_a(self) -> int:
        return sum(1 << v for v in self.side_a)

    @property
    def mask_b(self) -> int:
        return sum(1 << v for v in self.side_b)

    def swapped(self) -> Bipartition:
        return Bipartition(self.side_b, self.side_a)


def _check_vertex(g: Graph, v: int) -> None:
    if not 0 <= v < g.n:
        raise IndexError(f"vertex {v} out of range for n={g.n}")


def _check_partition(g: Graph, p: Bipartition) -> None:
    if p.side_a | p.side_b != frozenset(range(g.n)):
        raise ValueError(f"bipartition does not cover vertices 0..{g.n - 1}")


def local_complement(g: Graph, v: int) -> Graph:
    """Complement the subgraph induced on the neighbourhood of ``v``."""
    _check_vertex(g, v)
    nbhd = g.rows[v]
    rows = list(g.rows)
    for u in _bits(nbhd):
        rows[u] ^= nbhd & ~(1 << u)
    return Graph(g.n, tuple(rows))


def delete_vertex(g: Graph, v: int) -> tuple[Graph, dict[int, int]]:
    """Remove vertex ``v``; returns the smaller graph and an old->new index map."""
    _check_vertex(g, v)
    relabel = {u: (u if u < v else u - 1) for u in range(g.n) if u != v}
    edges = [(relabel[a], relabel[b]) for a, b in g.edges() if v not in (a, b)]
    return Graph.from_edges(g.n - 1, edges), relabel


def gf2_rank(rows: Sequence[int]) -> int:
    """Rank over GF(2) of bit-packed rows; pivots are taken lowest row index first."""
    work = list(rows)
    rank = 0
    for i in range(len(work)):
        pivot = work[i]
        if not pivot:
            continue
        rank += 1
        low = pivot & -pivot
        for j in range(i + 1, len(work)):
            if work[j] & low:
                work[j] ^= pivot
    return rank


def cut_rank_mask(g: Graph, mask_a: int) -> int:
    mask_b = g.full_mask & ~mask_a
    return gf2_rank([g.rows[a] & mask_b for a in _bits(mask_a)])


def crossing_mask(g: Graph, mask_a: int) -> int:
    mask_b = g.full_mask & ~mask_a
    return sum((g.rows[a] & mask_b).bit_count() for a in _bits(mask_a))


def cut_rank(g: Graph, p: Bipartition) -> int:
    """GF(2) rank of the adjacency block between the two sides of ``p``."""
    _check_partition(g, p)
    return cut_rank_mask(g, p.mask_a)


def crossing_edges(g: Graph, p: Bipartition) -> int:
    """Number of edges with one endpoint on each side of ``p``."""
    _check_partition(g, p)
    return crossing_mask(g, p.mask_a)


# graph families


def empty_graph(n: int) -> Graph:
    return Graph(n, (0,) * n)


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return Graph.from_edges(n, ((i, (i + 1) % n) for i in range(n)))


def star_graph(leaves: int) -> Graph:
    """Star with centre 0 and ``leaves`` outer vertices."""
    return Graph.from_edges(leaves + 1, ((0, i) for i in range(1, leaves + 1)))


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((u, v) for u in range(n) for v in range(u + 1, n)))


def complete_bipartite_graph(p: int, q: int) -> Graph:
    return Graph.from_edges(p + q, ((u, p + v) for u in range(p) for v in range(q)))


def random_bounded_degree_graph(
    n: int,
    max_degree: int,
    rng: random.Random,
    edge_prob: float | None = None,
    max_tries: int = 10_000,
) -> Graph:
    """Erdos-Renyi sample conditioned on connectivity and ``max_degree``.

    Rejection sampling; ``edge_prob`` defaults to ``min(0.5, 2 / (n - 1))``.
    Raises :class:`CapExceededError` if ``max_tries`` draws all fail, which is
    the norm for ``max_degree=2`` beyond a handful of vertices (only paths and
    cycles qualify).
    """
    if edge_prob is None:
        edge_prob = min(0.5, 2 / max(n - 1, 1))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    for _ in range(max_tries):
        edges = [e for e in pairs if rng.random() < edge_prob]
        g = Graph.from_edges(n, edges)
        if g.max_degree <= max_degree and g.is_connected():
            return g
    raise CapExceededError(f"no connected graph with n={n}, max degree {max_degree} after {max_tries} draws")


def all_graphs(n_min: int, n_max: int, connected_only: bool = False) -> Iterator[tuple[str, Graph]]:
    """All graphs on ``n_min..n_max`` vertices, up to isomorphism (n <= 7).

    Yields ``(graph_id, graph)`` in atlas order.
    """
    if n_max > 7:
        raise ValueError("the graph atlas covers n <= 7 only")
    from networkx.generators.atlas import graph_atlas_g

    for index, nx_graph in enumerate(graph_atlas_g()):
        n = nx_graph.number_of_nodes()
        if n < max(n_min, 1) or n > n_max:
            continue
        g = Graph.from_networkx(nx_graph)
        if connected_only and not g.is_connected():
            continue
        yield f"atlas-{index}", g


def connected_graphs(n_min: int, n_max: int) -> Iterator[tuple[str, Graph]]:
    """Connected members of :func:`all_graphs`."""
    return all_graphs(n_min, n_max, connected_only=True)
