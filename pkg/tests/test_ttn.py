import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqcwidth.dense import PovmElement, StateVector, graph_state, measure_qubit, product_state, schmidt_rank
from mqcwidth.exceptions import CapExceededError, DegenerateBranchError
from mqcwidth.graphs import Bipartition, complete_graph, cut_rank_mask, cycle_graph, star_graph
from mqcwidth.ttn import ttn_amplitude, ttn_bond_dims, ttn_from_dense, ttn_measure_qubit, ttn_to_dense
from mqcwidth.widths import TreeLayout, count_tree_layouts, rank_width, tree_layout_at

from .conftest import fig1_tree_edges
from .strategies import graphs

FIG1 = TreeLayout(5, fig1_tree_edges())


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, v / np.linalg.norm(v))


def side_of(tree, edge):
    return tree.edge_masks()[edge]


class TestBuild:
    def test_product_state_dims_one(self):
        s = product_state([np.array([1, 0])] * 5)
        ttn = ttn_from_dense(s, FIG1, root_edge=(6, 7))
        assert set(ttn_bond_dims(ttn).values()) == {1}

    def test_k2(self):
        ttn = ttn_from_dense(graph_state(complete_graph(2)), TreeLayout(2, ((0, 1),)))
        assert set(ttn_bond_dims(ttn).values()) == {2}
        assert ttn_amplitude(ttn, [1, 1]) == pytest.approx(-0.5)

    def test_k5_fig1_all_bonds_two(self):
        ttn = ttn_from_dense(graph_state(complete_graph(5)), FIG1, root_edge=(6, 7))
        dims = ttn_bond_dims(ttn)
        assert set(dims) == set(FIG1.edges)
        assert set(dims.values()) == {2}

    def test_star(self):
        g = star_graph(4)
        t = tree_layout_at(5, 3)
        ttn = ttn_from_dense(graph_state(g), t)
        assert max(ttn_bond_dims(ttn).values()) == 2

    def test_amplitude_basis(self):
        ttn = ttn_from_dense(product_state([np.array([1, 0])] * 5), FIG1)
        assert ttn_amplitude(ttn, [0] * 5) == pytest.approx(1)
        assert ttn_amplitude(ttn, [1, 0, 0, 0, 0]) == pytest.approx(0)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            ttn_from_dense(graph_state(complete_graph(4)), FIG1)

    def test_cap(self):
        with pytest.raises(CapExceededError):
            ttn_from_dense(graph_state(complete_graph(5)), FIG1, cap=4)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_state_round_trip(self, seed):
        s = random_state(5, seed)
        ttn = ttn_from_dense(s, tree_layout_at(5, seed * 3))
        assert np.allclose(ttn_to_dense(ttn).amplitudes, s.amplitudes)
        for bits in ([0, 1, 1, 0, 1], [1, 1, 1, 1, 1]):
            assert ttn_amplitude(ttn, bits) == pytest.approx(s.amplitude(bits))

    def test_parameter_bound(self):
        g = cycle_graph(8)
        _, tree = rank_width(g)
        ttn = ttn_from_dense(graph_state(g), tree)
        chi = max(ttn_bond_dims(ttn).values())
        assert ttn.parameter_count() <= 8 * g.n * chi**3


class TestBridge:
    @settings(max_examples=40, deadline=None)
    @given(graphs(2, 7), st.integers(0, 10**6))
    def test_bond_dims_are_cut_rank_powers(self, g, index):
        t = tree_layout_at(g.n, index % count_tree_layouts(g.n))
        ttn = ttn_from_dense(graph_state(g), t)
        masks = t.edge_masks()
        for edge, dim in ttn_bond_dims(ttn).items():
            assert dim == 2 ** cut_rank_mask(g, masks[edge])

    @settings(max_examples=30, deadline=None)
    @given(graphs(2, 6), st.integers(0, 10**6))
    def test_bond_dims_are_schmidt_ranks(self, g, index):
        t = tree_layout_at(g.n, index % count_tree_layouts(g.n))
        s = graph_state(g)
        ttn = ttn_from_dense(s, t)
        for edge, dim in ttn_bond_dims(ttn).items():
            assert dim == schmidt_rank(s, Bipartition.from_mask(g.n, t.edge_masks()[edge]))


class TestMeasure:
    def test_plus_z(self):
        s = product_state([np.array([1, 1]) / np.sqrt(2), np.array([1, 0])])
        ttn = ttn_from_dense(s, TreeLayout(2, ((0, 1),)))
        prob, post = ttn_measure_qubit(ttn, 0, "z", outcome=0)
        assert prob == pytest.approx(0.5)
        assert ttn_amplitude(post, [0, 0]) == pytest.approx(1)

    def test_k2_z_drops_bond(self):
        ttn = ttn_from_dense(graph_state(complete_graph(2)), TreeLayout(2, ((0, 1),)))
        prob, post = ttn_measure_qubit(ttn, 0, "z", outcome=1)
        assert prob == pytest.approx(0.5)
        assert set(ttn_bond_dims(post).values()) == {1}

    @pytest.mark.parametrize("q", range(6))
    @pytest.mark.parametrize("basis", ["x", "y", "z", 0.7])
    def test_cycle_matches_dense(self, q, basis):
        g = cycle_graph(6)
        _, tree = rank_width(g)
        s = graph_state(g)
        ttn = ttn_from_dense(s, tree)
        for outcome in (0, 1):
            prob, post = ttn_measure_qubit(ttn, q, basis, outcome=outcome)
            _, dense_prob, dense_post = measure_qubit(s, q, basis, outcome=outcome)
            assert prob == pytest.approx(dense_prob, abs=1e-10)
            assert np.allclose(ttn_to_dense(post).amplitudes, dense_post.amplitudes, atol=1e-9)
            for edge, dim in ttn_bond_dims(post).items():
                side = Bipartition.from_mask(g.n, tree.edge_masks()[edge])
                assert dim == schmidt_rank(dense_post, side)

    def test_povm_element(self):
        s = graph_state(complete_graph(3))
        ttn = ttn_from_dense(s, tree_layout_at(3, 0))
        e = PovmElement(0, np.diag([0.25, 0.75]))
        prob, _ = ttn_measure_qubit(ttn, 0, e)
        assert prob == pytest.approx(0.5)

    def test_degenerate(self):
        ttn = ttn_from_dense(product_state([np.array([1, 0])] * 2), TreeLayout(2, ((0, 1),)))
        with pytest.raises(DegenerateBranchError):
            ttn_measure_qubit(ttn, 1, "z", outcome=1)

    def test_needs_outcome(self):
        ttn = ttn_from_dense(graph_state(complete_graph(2)), TreeLayout(2, ((0, 1),)))
        with pytest.raises(ValueError):
            ttn_measure_qubit(ttn, 0, "z")

    @settings(max_examples=25, deadline=None)
    @given(graphs(3, 7, connected=True), st.integers(0, 10**6))
    def test_bonds_never_grow(self, g, seed):
        rng = random.Random(seed)
        t = tree_layout_at(g.n, seed % count_tree_layouts(g.n))
        s = graph_state(g)
        ttn = ttn_from_dense(s, t)
        for q in rng.sample(range(g.n), g.n // 2):
            basis = rng.choice(["x", "y", "z"])
            outcome, _, s = measure_qubit(s, q, basis, rng=rng)
            before = ttn_bond_dims(ttn)
            _, ttn = ttn_measure_qubit(ttn, q, basis, outcome=outcome)
            after = ttn_bond_dims(ttn)
            assert all(after[e] <= before[e] for e in before)
            assert np.allclose(ttn_to_dense(ttn).amplitudes, s.amplitudes, atol=1e-9)
