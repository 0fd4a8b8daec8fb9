import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqcwidth.dense import born_probability, graph_state
from mqcwidth.exceptions import MalformedSequenceError
from mqcwidth.graphs import Graph, complete_graph, crossing_mask, cycle_graph, path_graph
from mqcwidth.mqc import peps_tensors, probability_network
from mqcwidth.tensors import (
    ContractionSequence,
    Tensor,
    TensorNetwork,
    contract_pair,
    execute_sequence,
    sequence_from_tree,
    tree_from_sequence,
)
from mqcwidth.widths import TreeLayout, carving_width, enumerate_tree_layouts, tree_layout_at

from .conftest import fig1_tree_edges
from .strategies import graphs

Z0 = np.diag([1.0, 0.0])


def fs(*xs):
    return frozenset(xs)


@st.composite
def sequences(draw, max_n=7):
    n = draw(st.integers(2, max_n))
    pool = [fs(v) for v in range(n)]
    steps = []
    while len(pool) > 1:
        i, j = draw(st.lists(st.integers(0, len(pool) - 1), min_size=2, max_size=2, unique=True))
        a, b = pool[i], pool[j]
        steps.append((a, b))
        pool = [x for k, x in enumerate(pool) if k not in (i, j)] + [a | b]
    return ContractionSequence(n, tuple(steps))


class TestTensor:
    def test_duplicate_labels(self):
        with pytest.raises(ValueError):
            Tensor(("a", "a"), np.eye(2))

    def test_rank_mismatch(self):
        with pytest.raises(ValueError):
            Tensor(("a",), np.eye(2))

    def test_transpose(self):
        t = Tensor(("a", "b"), np.arange(6).reshape(2, 3))
        assert t.transpose(("b", "a")).data.shape == (3, 2)
        assert t.dims == {"a": 2, "b": 3}


class TestContractPair:
    def test_matrix_vector(self):
        out = contract_pair(Tensor(("i", "j"), np.eye(2)), Tensor(("j",), np.array([1, 0])))
        assert out.labels == ("i",) and np.allclose(out.data, [1, 0])

    def test_dot_product(self):
        out = contract_pair(Tensor(("k",), np.array([1, 2])), Tensor(("k",), np.array([3, 4])))
        assert out.labels == () and complex(out.data) == 11

    def test_cz_on_plus_inputs(self):
        cz = np.zeros((2, 2, 2, 2))
        for a in (0, 1):
            for b in (0, 1):
                cz[a, b, a, b] = (-1) ** (a * b)
        plus = np.array([1, 1]) / np.sqrt(2)
        t = contract_pair(Tensor(("in0", "in1", "out0", "out1"), cz), Tensor(("in0",), plus))
        t = contract_pair(t, Tensor(("in1",), plus))
        assert np.allclose(t.array(("out0", "out1")), graph_state(complete_graph(2)).tensor())
        assert np.allclose(t.array(("out0", "out1")).reshape(-1), [0.5, 0.5, 0.5, -0.5])

    def test_outer_product(self):
        out = contract_pair(Tensor(("a",), np.array([1, 2])), Tensor(("b",), np.array([3, 4])))
        assert out.data.shape == (2, 2) and out.data[1, 1] == 8

    def test_extent_mismatch(self):
        with pytest.raises(ValueError):
            contract_pair(Tensor(("a",), np.ones(2)), Tensor(("a",), np.ones(3)))

    @settings(max_examples=30)
    @given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), st.integers(0, 1000))
    def test_bilinear(self, alpha, seed):
        rng = np.random.default_rng(seed)
        a = Tensor(("x", "y"), rng.normal(size=(2, 3)))
        b = Tensor(("y", "z"), rng.normal(size=(3, 2)))
        assert np.allclose(contract_pair(a.scale(alpha), b).data, alpha * contract_pair(a, b).data, atol=1e-12)


class TestNetwork:
    def test_label_on_three_tensors(self):
        t = Tensor(("a",), np.ones(2))
        with pytest.raises(ValueError):
            TensorNetwork((t, t, t))

    def test_bond_graph(self):
        net = peps_tensors(cycle_graph(4))
        assert net.bond_graph() == cycle_graph(4)
        assert sorted(net.open_labels) == [("p", v) for v in range(4)]
        assert net.external_bonds([0, 1]) == 2


class TestSequence:
    def test_validation(self):
        with pytest.raises(MalformedSequenceError):
            ContractionSequence(3, ((fs(0), fs(1)), (fs(0), fs(2))))
        with pytest.raises(MalformedSequenceError):
            ContractionSequence(3, ((fs(0), fs(1)),))
        with pytest.raises(MalformedSequenceError):
            ContractionSequence(2, ((fs(0), fs(0, 1)),))

    def test_json_round_trip(self):
        seq = sequence_from_tree(tree_layout_at(6, 17))
        assert ContractionSequence.from_json(seq.to_json()) == seq

    def test_two_leaf_tree(self):
        seq = sequence_from_tree(TreeLayout(2, ((0, 1),)))
        assert seq.steps == ((fs(0), fs(1)),)

    def test_fig1(self):
        seq = sequence_from_tree(TreeLayout(5, fig1_tree_edges()), root_edge=(6, 7))
        assert seq.sets == [fs(0, 1), fs(0, 1, 2), fs(3, 4), fs(0, 1, 2, 3, 4)]

    def test_fig1_round_trip(self):
        t = TreeLayout(5, fig1_tree_edges())
        back = tree_from_sequence(sequence_from_tree(t, root_edge=(6, 7)))
        assert set(back.edge_masks().values()) == set(t.edge_masks().values())

    def test_single_step_sequence(self):
        t = tree_from_sequence(ContractionSequence(2, ((fs(0), fs(1)),)))
        assert t.edges == ((0, 1),)

    @pytest.mark.parametrize("t", list(enumerate_tree_layouts(4)))
    def test_four_leaf_trees(self, t):
        seq = sequence_from_tree(t)
        assert len(seq.steps) == 3
        full = 0b1111
        tree_sides = {frozenset([m, full ^ m]) for m in t.edge_masks().values()}
        for s in seq.sets[:-1]:
            m = sum(1 << v for v in s)
            assert frozenset([m, full ^ m]) in tree_sides

    @settings(max_examples=60)
    @given(sequences())
    def test_tree_from_sequence_bipartitions(self, seq):
        t = tree_from_sequence(seq)
        full = (1 << seq.n) - 1
        canon = lambda m: min(m, full ^ m)
        tree_sides = {canon(m) for m in t.edge_masks().values()}
        seq_sides = {canon(sum(1 << v for v in s)) for s in seq.sets[:-1]}
        singletons = {canon(1 << v) for v in range(seq.n)}
        assert tree_sides == seq_sides | singletons


class TestExecute:
    def test_k2_probability(self):
        g = complete_graph(2)
        net = probability_network(g, [Z0, Z0])
        seq = ContractionSequence(2, ((fs(0), fs(1)),))
        out, lmax, trace = execute_sequence(net, seq)
        assert complex(out.data).real == pytest.approx(0.25)
        assert lmax == 1 and trace == [0]

    def test_six_cycle_identity(self):
        g = cycle_graph(6)
        value, tree = carving_width(g)
        out, lmax, _ = execute_sequence(probability_network(g, [None] * 6), sequence_from_tree(tree))
        assert complex(out.data) == pytest.approx(1.0)
        assert value == 2 and lmax == 2

    def test_order_independent_value(self):
        g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)])
        elements = [Z0, None, np.diag([0, 1.0]), None, Z0]
        results, traces = [], []
        for i in (0, 7, 14):
            out, _, trace = execute_sequence(probability_network(g, elements), sequence_from_tree(tree_layout_at(5, i)))
            results.append(complex(out.data))
            traces.append(trace)
        assert np.allclose(results, born_probability(graph_state(g), elements))
        assert len({tuple(t) for t in traces}) > 1

    def test_entry_cap(self):
        g = complete_graph(6)
        seq = sequence_from_tree(tree_layout_at(6, 0))
        with pytest.raises(MemoryError, match="step"):
            execute_sequence(peps_tensors(g), seq, entry_cap=16)

    def test_size_mismatch(self):
        with pytest.raises(MalformedSequenceError):
            execute_sequence(peps_tensors(path_graph(3)), ContractionSequence(2, ((fs(0), fs(1)),)))

    @settings(max_examples=40, deadline=None)
    @given(graphs(2, 7), st.data())
    def test_lmax_is_tree_crossing_max(self, g, data):
        index = data.draw(st.integers(0, 10**6))
        from mqcwidth.widths import count_tree_layouts

        t = tree_layout_at(g.n, index % count_tree_layouts(g.n))
        seq = sequence_from_tree(t)
        _, lmax, trace = execute_sequence(probability_network(g, [None] * g.n), seq)
        tree_max = max(crossing_mask(g, m) for m in t.edge_masks().values())
        assert lmax == tree_max == seq.max_rank(g)
        assert trace == seq.ranks(g)
