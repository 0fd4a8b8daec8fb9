"""Tree layouts over qubits and exact width parameters.

A :class:`TreeLayout` is an unrooted tree whose leaves ``0..n-1`` are the qubits and
whose internal vertices (ids ``n, n+1, ...``) have degree 3, with at most one
degree-2 vertex allowed as an explicit root.  Every tree edge induces a bipartition
of the qubits; leaf edges induce the singleton cuts.

Widths minimise, over all layouts, the largest value of a symmetric cut function
on the tree edges: the crossing-edge count gives the carving width (contraction
complexity), the GF(2) cut-rank gives the rank width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .exceptions import CapExceededError
from .graphs import Bipartition, Graph, crossing_mask, cut_rank_mask

__all__ = [
    "TreeLayout",
    "RootedTree",
    "count_tree_layouts",
    "enumerate_tree_layouts",
    "tree_layout_at",
    "branch_width",
    "carving_width",
    "rank_width",
    "treewidth",
    "tree_width_value",
    "DEFAULT_TREE_CAP",
    "DEFAULT_EXACT_CAP",
    "DEFAULT_TWD_CAP",
]

DEFAULT_TREE_CAP = 9
DEFAULT_EXACT_CAP = 18
DEFAULT_TWD_CAP = 15


@dataclass(frozen=True)
class RootedTree:
    """A layout rooted at a degree-2 vertex.

    ``split_edge`` is the layout edge that the root subdivides; it is ``None`` when
    the layout already carried a degree-2 vertex.
    """

    root: int
    children: dict[int, tuple[int, ...]]
    parent: dict[int, int]
    leaf_masks: dict[int, int]
    split_edge: tuple[int, int] | None

    def postorder(self) -> list[int]:
        order: list[int] = []
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                order.append(v)
                continue
            stack.append((v, True))
            for c in reversed(self.children.get(v, ())):
                stack.append((c, False))
        return order

    def original_edge(self, v: int) -> tuple[int, int]:
        """Layout edge represented by the bond between ``v`` and its parent."""
        p = self.parent[v]
        if p == self.root and self.split_edge is not None:
            return self.split_edge
        return (min(v, p), max(v, p))


@dataclass(frozen=True)
class TreeLayout:
    leaves: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n = self.leaves
        if n < 2:
            raise ValueError("a tree layout needs at least 2 leaves")
        edges = tuple(sorted((min(a, b), max(a, b)) for a, b in self.edges))
        object.__setattr__(self, "edges", edges)
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate tree edge")
        n_vertices = len(edges) + 1
        deg = [0] * n_vertices
        for a, b in edges:
            if not (0 <= a < n_vertices and 0 <= b < n_vertices) or a == b:
                raise ValueError(f"tree edge ({a}, {b}) uses an invalid vertex id")
            deg[a] += 1
            deg[b] += 1
        if any(deg[v] != 1 for v in range(n)):
            raise ValueError("every qubit must be a leaf of the layout")
        internal = deg[n:]
        if any(d not in (2, 3) for d in internal) or sum(d == 2 for d in internal) > 1:
            raise ValueError("internal vertices must have degree 3 (at most one of degree 2)")
        adj = self.adjacency()
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        if len(seen) != n_vertices:
            raise ValueError("tree layout is not connected")

    @property
    def n_vertices(self) -> int:
        return len(self.edges) + 1

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in range(len(self.edges) + 1)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for v in adj:
            adj[v].sort()
        return adj

    def is_leaf(self, v: int) -> bool:
        return v < self.leaves

    def internal_edges(self) -> list[tuple[int, int]]:
        return [e for e in self.edges if e[0] >= self.leaves and e[1] >= self.leaves]

    def edge_masks(self) -> dict[tuple[int, int], int]:
        """Leaf mask of the side of each edge that does not contain leaf 0."""
        adj = self.adjacency()
        parent = {0: -1}
        order = [0]
        for v in order:
            for u in adj[v]:
                if u not in parent:
                    parent[u] = v
                    order.append(u)
        below = {v: (1 << v if v < self.leaves else 0) for v in parent}
        for v in reversed(order[1:]):
            below[parent[v]] |= below[v]
        return {(min(v, parent[v]), max(v, parent[v])): below[v] for v in order[1:]}

    def bipartitions(self) -> dict[tuple[int, int], Bipartition]:
        return {e: Bipartition.from_mask(self.leaves, m) for e, m in self.edge_masks().items()}

    def rooted(self, root_edge: tuple[int, int] | None = None) -> RootedTree:
        """Root at the degree-2 vertex, inserting one on an edge when absent.

        Without ``root_edge`` the first internal edge is split, or the edge at the
        last leaf when the layout has no internal edge.
        """
        adj = self.adjacency()
        deg2 = [v for v in adj if v >= self.leaves and len(adj[v]) == 2]
        split = None
        if deg2:
            root = deg2[0]
        else:
            if root_edge is None:
                internal = self.internal_edges()
                last = self.leaves - 1
                root_edge = internal[0] if internal else next(e for e in self.edges if last in e)
            split = (min(root_edge), max(root_edge))
            if split not in self.edges:
                raise ValueError(f"{root_edge} is not an edge of the layout")
            root = self.n_vertices
            a, b = split
            adj = {v: list(nb) for v, nb in adj.items()}
            adj[a] = [root if u == b else u for u in adj[a]]
            adj[b] = [root if u == a else u for u in adj[b]]
            adj[root] = [a, b]
        parent: dict[int, int] = {}
        order = [root]
        seen = {root}
        for v in order:
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    parent[u] = v
                    order.append(u)
        masks = {v: (1 << v if v < self.leaves else 0) for v in order}
        for v in reversed(order[1:]):
            masks[parent[v]] |= masks[v]
        children: dict[int, list[int]] = {v: [] for v in order}
        for v in order[1:]:
            children[parent[v]].append(v)
        ordered = {
            v: tuple(sorted(cs, key=lambda c: _lowest(masks[c]))) for v, cs in children.items()
        }
        return RootedTree(root, ordered, parent, masks, split)

    def to_json(self) -> dict:
        return {"leaves": self.leaves, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data: dict) -> TreeLayout:
        try:
            return cls(int(data["leaves"]), tuple(tuple(int(x) for x in e) for e in data["edges"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed tree JSON: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def _lowest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def count_tree_layouts(n: int) -> int:
    """(2n-5)!! for n >= 3, and 1 for n = 2."""
    count = 1
    for k in range(3, n):
        count *= 2 * k - 3
    return count


def _check_cap(n: int, cap: int) -> None:
    if n < 2:
        raise ValueError("tree layouts need at least 2 leaves")
    if n > cap:
        raise CapExceededError(f"{n} leaves exceeds the tree enumeration cap {cap}")


def _start_edges(n: int) -> list[tuple[int, int]]:
    if n == 2:
        return [(0, 1)]
    # oriented (towards leaf 0, away from leaf 0) so that insertion positions line
    # up with the mask table below
    return [(0, n), (n, 1), (n, 2)]


def _insert_leaf(edges: list[tuple[int, int]], i: int, k: int, n: int) -> list[tuple[int, int]]:
    a, b = edges[i]
    w = n + k - 2
    out = list(edges)
    out[i] = (a, w)
    out.append((w, b))
    out.append((w, k))
    return out


def enumerate_tree_layouts(n: int, cap: int = DEFAULT_TREE_CAP) -> Iterator[TreeLayout]:
    """Every unrooted subcubic tree with ``n`` labelled leaves, each exactly once.

    Leaves ``3..n-1`` are inserted one at a time by subdividing each existing edge.
    """
    _check_cap(n, cap)

    def grow(edges, k):
        if k >= n:
            yield TreeLayout(n, tuple(edges))
            return
        for i in range(len(edges)):
            yield from grow(_insert_leaf(edges, i, k, n), k + 1)

    yield from grow(_start_edges(n), 3)


def tree_layout_at(n: int, index: int) -> TreeLayout:
    """The ``index``-th layout in :func:`enumerate_tree_layouts` order."""
    total = count_tree_layouts(n)
    if not 0 <= index < total:
        raise IndexError(f"layout index {index} out of range for n={n}")
    digits = []
    for k in range(n - 1, 2, -1):
        radix = 2 * k - 3
        digits.append(index % radix)
        index //= radix
    edges = _start_edges(n)
    for k, i in zip(range(3, n), reversed(digits)):
        edges = _insert_leaf(edges, i, k, n)
    return TreeLayout(n, tuple(edges))


@lru_cache(maxsize=None)
def _layout_mask_table(n: int) -> np.ndarray:
    """Array of shape (#layouts, 2n-3) with the leaf-0-free side of every edge.

    Rows follow :func:`enumerate_tree_layouts` order.  Masks are grown alongside
    the insertion: subdividing edge (p, c) with lower side m adds leaf k below
    every edge whose lower side contains m.
    """
    rows: list[list[int]] = []

    if n == 2:
        return np.array([[2]], dtype=np.int64)
    # edge (0,n) has lower side {1,2}; edges (1,n), (2,n) are leaf edges
    start = [0b110, 0b010, 0b100]

    def grow(masks, k):
        if k == n:
            rows.append(masks)
            return
        bit = 1 << k
        for i, m in enumerate(masks):
            new = [(x | bit) if (x & m) == m and j != i else x for j, x in enumerate(masks)]
            new[i] = m | bit
            new.append(m)
            new.append(bit)
            grow(new, k + 1)

    grow(start, 3)
    return np.array(rows, dtype=np.int64)


def _cut_table(n: int, cut: Callable[[int], int]) -> np.ndarray:
    return np.array([cut(m) if 0 < m < (1 << n) - 1 else 0 for m in range(1 << n)], dtype=np.int64)


def layout_maxima(n: int, cut: Callable[[int], int], cap: int = DEFAULT_TREE_CAP) -> np.ndarray:
    """Max cut value over the edges of every enumerated layout (enumeration order)."""
    _check_cap(n, cap)
    table = _cut_table(n, cut)
    return table[_layout_mask_table(n)].max(axis=1)


def tree_width_value(tree: TreeLayout, cut: Callable[[int], int]) -> int:
    return max(cut(m) for m in tree.edge_masks().values())


def _width_by_enumeration(n: int, cut, cap: int) -> tuple[int, TreeLayout]:
    maxima = layout_maxima(n, cut, cap)
    best = int(np.argmin(maxima))
    return int(maxima[best]), tree_layout_at(n, best)


def _width_by_subsets(n: int, cut, cap: int) -> tuple[int, TreeLayout]:
    """Exact width by a decision search over leaf subsets.

    Leaf 0 hangs off the subtree spanning the other leaves; a subset S is
    realisable at width k if cut(S) <= k and S is a singleton or splits into two
    realisable halves.  k rises from the best singleton bound until feasible.
    """
    if n > cap:
        raise CapExceededError(f"{n} vertices exceeds the exact width cap {cap}")
    cache: dict[int, int] = {}

    def f(mask: int) -> int:
        v = cache.get(mask)
        if v is None:
            v = cache[mask] = cut(mask)
        return v

    full = (1 << n) - 1
    rest = full & ~1
    k = max(f(1 << v) for v in range(n))
    while True:
        memo: dict[int, tuple[int, int] | None] = {}

        def feasible(s: int) -> bool:
            if s & (s - 1) == 0:
                return True
            if s in memo:
                return memo[s] is not None
            low = s & -s
            others = s ^ low
            sub = others
            found = None
            while True:
                left = sub | low
                right = s ^ left
                if right and f(left) <= k and f(right) <= k and feasible(left) and feasible(right):
                    found = (left, right)
                    break
                if sub == 0:
                    break
                sub = (sub - 1) & others
            memo[s] = found
            return found is not None

        if f(rest) <= k and feasible(rest):
            break
        k += 1

    edges: list[tuple[int, int]] = []
    next_id = [n]

    def build(s: int) -> int:
        if s & (s - 1) == 0:
            return _lowest(s)
        v = next_id[0]
        next_id[0] += 1
        left, right = memo[s]
        edges.append((v, build(left)))
        edges.append((v, build(right)))
        return v

    edges.append((0, build(rest)))
    return k, TreeLayout(n, tuple(edges))


def branch_width(
    n: int,
    cut: Callable[[int], int],
    method: str | None = None,
    tree_cap: int = DEFAULT_TREE_CAP,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> tuple[int, TreeLayout]:
    """Min over layouts with ``n`` leaves of the max of a symmetric cut function.

    ``method`` is ``"enumerate"`` (all layouts, up to ``tree_cap`` leaves) or
    ``"subsets"`` (exact subset search, up to ``exact_cap``); by default the
    enumeration is used whenever it is within its cap.
    """
    if n < 2:
        raise ValueError("width parameters need at least 2 vertices")
    if method is None:
        method = "enumerate" if n <= tree_cap else "subsets"
    if method == "enumerate":
        return _width_by_enumeration(n, cut, tree_cap)
    if method == "subsets":
        return _width_by_subsets(n, cut, exact_cap)
    raise ValueError(f"unknown width method {method!r}")


def _width(g: Graph, cut, method: str | None, tree_cap: int, exact_cap: int):
    if not g.is_connected():
        raise ValueError("graph is disconnected; compute widths per component")
    return branch_width(g.n, cut, method, tree_cap, exact_cap)


def carving_width(
    g: Graph,
    method: str | None = None,
    tree_cap: int = DEFAULT_TREE_CAP,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> tuple[int, TreeLayout]:
    """Contraction complexity: min over layouts of the max crossing-edge count.

    See :func:`branch_width` for ``method`` and the caps.  Disconnected graphs
    are rejected.
    """
    return _width(g, lambda m: crossing_mask(g, m), method, tree_cap, exact_cap)


def rank_width(
    g: Graph,
    method: str | None = None,
    tree_cap: int = DEFAULT_TREE_CAP,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> tuple[int, TreeLayout]:
    """Min over layouts of the max GF(2) cut-rank, with an optimal layout."""
    return _width(g, lambda m: cut_rank_mask(g, m), method, tree_cap, exact_cap)


def treewidth(g: Graph, cap: int = DEFAULT_TWD_CAP) -> int:
    """Exact treewidth by dynamic programming over elimination prefixes.

    TW(S) = min over v in S of max(TW(S - v), Q(S - v, v)), where Q(S, v) counts
    vertices outside S + v reachable from v through S.
    """
    if g.n > cap:
        raise CapExceededError(f"{g.n} vertices exceeds the treewidth cap {cap}")
    if g.n == 0:
        return 0
    rows = g.rows

    def q(s: int, v: int) -> int:
        comp = 0
        frontier = rows[v] & s
        while frontier:
            comp |= frontier
            reach = 0
            m = frontier
            while m:
                low = m & -m
                reach |= rows[low.bit_length() - 1]
                m ^= low
            frontier = reach & s & ~comp
        nb = rows[v]
        m = comp
        while m:
            low = m & -m
            nb |= rows[low.bit_length() - 1]
            m ^= low
        return (nb & ~s & ~(1 << v)).bit_count()

    @lru_cache(maxsize=None)
    def tw(s: int) -> int:
        if s == 0:
            return -1
        best = g.n
        m = s
        while m:
            low = m & -m
            v = low.bit_length() - 1
            m ^= low
            rest = s ^ low
            cand = max(tw(rest), q(rest, v))
            if cand < best:
                best = cand
        return best

    return max(tw(g.full_mask), 0)


def layout_cut_values(tree: TreeLayout, values: Sequence[int] | Callable[[int], int]) -> dict[tuple[int, int], int]:
    """Evaluate a cut function (callable on masks, or a table) on every layout edge."""
    fn = values if callable(values) else (lambda m: values[m])
    return {e: fn(m) for e, m in tree.edge_masks().items()}
