import itertools
from functools import lru_cache

import pytest
from hypothesis import given, settings

from mqcwidth.exceptions import CapExceededError
from mqcwidth.graphs import (
    Bipartition,
    Graph,
    complete_graph,
    crossing_mask,
    cut_rank_mask,
    cycle_graph,
    path_graph,
    star_graph,
)
from mqcwidth.widths import (
    TreeLayout,
    branch_width,
    carving_width,
    count_tree_layouts,
    enumerate_tree_layouts,
    rank_width,
    tree_layout_at,
    tree_width_value,
    treewidth,
)

from .conftest import fig1_tree_edges
from .strategies import graphs


def width_oracle(n, cut):
    """Independent recursion: best hierarchy over the leaves 1..n-1, leaf 0 hung on top.

    Every layout edge is the edge above some cluster S (or a singleton); cost is
    the max cut over all clusters in the hierarchy.
    """

    @lru_cache(maxsize=None)
    def best(s):
        if s & (s - 1) == 0:
            return cut(s)
        low = s & -s
        rest = s ^ low
        out = None
        sub = rest
        # enumerate splits S = A + B with A containing the lowest element
        while True:
            a = low | sub
            b = s ^ a
            if b:
                cand = max(cut(s), best(a), best(b))
                out = cand if out is None else min(out, cand)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        return out

    full = (1 << n) - 1
    if n == 2:
        return cut(1)
    # root edge separates leaf 0 from the rest; its value equals cut({0})
    return max(cut(1), best(full ^ 1))


def treewidth_oracle(g):
    """Min over all elimination orders of the max degree at elimination (with fill-in)."""
    best = g.n
    for order in itertools.permutations(range(g.n)):
        adj = {v: set(g.neighbors(v)) for v in range(g.n)}
        width = 0
        for v in order:
            nb = adj.pop(v)
            width = max(width, len(nb))
            for u in nb:
                adj[u].discard(v)
                adj[u] |= nb - {u}
        best = min(best, width)
    return best


def double_factorial(k):
    return 1 if k <= 1 else k * double_factorial(k - 2)


class TestTreeLayout:
    def test_fig1_tree(self):
        t = TreeLayout(5, fig1_tree_edges())
        sides = {frozenset(b.side_a) if 0 not in b.side_a else frozenset(b.side_b) for b in t.bipartitions().values()}
        # internal edges give {0,1}|rest, {0,1,2}|{3,4}; leaf edges the singletons
        assert frozenset({3, 4}) in sides and frozenset({2, 3, 4}) in sides
        assert len(t.internal_edges()) == 2

    def test_rejects_bad_degree(self):
        with pytest.raises(ValueError):
            TreeLayout(4, ((0, 4), (1, 4), (2, 4), (3, 4)))

    def test_rejects_cycle(self):
        with pytest.raises(ValueError):
            TreeLayout(3, ((0, 3), (1, 3), (2, 4), (3, 4), (4, 3)))

    def test_json_round_trip(self):
        t = TreeLayout(5, fig1_tree_edges())
        assert TreeLayout.from_json(t.to_json()).edge_masks() == t.edge_masks()

    def test_rooted_uses_degree_two_vertex(self):
        t = TreeLayout(3, ((0, 3), (1, 3), (3, 4), (2, 4)))
        assert t.rooted().root == 4


class TestEnumeration:
    @pytest.mark.parametrize("n,expected", [(2, 1), (3, 1), (4, 3), (5, 15), (6, 105), (7, 945)])
    def test_counts(self, n, expected):
        assert count_tree_layouts(n) == expected
        if n > 2:
            assert expected == double_factorial(2 * n - 5)
        assert sum(1 for _ in enumerate_tree_layouts(n)) == expected

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_distinct(self, n):
        seen = {frozenset(t.edge_masks().values()) for t in enumerate_tree_layouts(n)}
        assert len(seen) == count_tree_layouts(n)

    def test_index_access_matches_stream(self):
        for i, t in enumerate(enumerate_tree_layouts(6)):
            assert tree_layout_at(6, i).edge_masks() == t.edge_masks()

    def test_cap(self):
        with pytest.raises(CapExceededError):
            next(enumerate_tree_layouts(10))


class TestWidthValues:
    def test_path_p4(self):
        assert carving_width(path_graph(4))[0] == 2

    def test_star_k13(self):
        assert carving_width(star_graph(3))[0] == 3

    def test_k2(self):
        g = complete_graph(2)
        assert carving_width(g)[0] == 1 and rank_width(g)[0] == 1 and treewidth(g) == 1

    @pytest.mark.parametrize("n", range(2, 9))
    def test_complete_rank_width(self, n):
        assert rank_width(complete_graph(n))[0] == 1

    def test_six_cycle(self):
        g = cycle_graph(6)
        assert rank_width(g)[0] == 2 and treewidth(g) == 2 and carving_width(g)[0] == 2

    def test_k4(self):
        g = complete_graph(4)
        assert carving_width(g)[0] == 4 and rank_width(g)[0] == 1 and treewidth(g) == 3

    @pytest.mark.parametrize("n", range(2, 9))
    def test_treewidth_of_trees_and_cliques(self, n):
        assert treewidth(path_graph(n)) == 1
        assert treewidth(complete_graph(n)) == n - 1

    def test_witness_achieves_value(self):
        g = cycle_graph(7)
        value, tree = carving_width(g)
        assert tree_width_value(tree, lambda m: crossing_mask(g, m)) == value

    def test_disconnected_rejected(self):
        with pytest.raises(ValueError):
            carving_width(Graph.from_edges(4, [(0, 1), (2, 3)]))

    def test_caps(self):
        with pytest.raises(CapExceededError):
            carving_width(cycle_graph(12), method="enumerate")
        with pytest.raises(CapExceededError):
            treewidth(path_graph(16))


class TestAgainstOracles:
    @settings(max_examples=60, deadline=None)
    @given(graphs(2, 7, connected=True))
    def test_carving_width_routes_agree(self, g):
        cut = lambda m: crossing_mask(g, m)
        expected = width_oracle(g.n, cut)
        enum_value, enum_tree = carving_width(g, method="enumerate")
        sub_value, sub_tree = carving_width(g, method="subsets")
        assert enum_value == sub_value == expected
        assert tree_width_value(sub_tree, cut) == sub_value

    @settings(max_examples=60, deadline=None)
    @given(graphs(2, 7, connected=True))
    def test_rank_width_routes_agree(self, g):
        cut = lambda m: cut_rank_mask(g, m)
        assert rank_width(g, method="enumerate")[0] == rank_width(g, method="subsets")[0] == width_oracle(g.n, cut)

    @settings(max_examples=40, deadline=None)
    @given(graphs(1, 6))
    def test_treewidth_matches_permutation_oracle(self, g):
        assert treewidth(g) == treewidth_oracle(g)

    @settings(max_examples=40, deadline=None)
    @given(graphs(2, 7, connected=True))
    def test_chiwd_inequality(self, g):
        assert carving_width(g)[0] >= rank_width(g)[0]

    def test_branch_width_multigraph_cut(self):
        # doubled edge 0-1 plus 1-2: the leaf edge of vertex 1 crosses 3 edge copies
        edges = [(0, 1), (0, 1), (1, 2)]
        cut = lambda m: sum(((m >> a) & 1) != ((m >> b) & 1) for a, b in edges)
        assert branch_width(3, cut)[0] == 3
