import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqcwidth import dense
from mqcwidth.dense import (
    PovmElement,
    StateVector,
    apply_cz,
    apply_single_qubit,
    born_probability,
    graph_state,
    measure_qubit,
    product_state,
    schmidt_rank,
)
from mqcwidth.exceptions import CapExceededError, DegenerateBranchError
from mqcwidth.graphs import Bipartition, Graph, complete_graph, cut_rank, cycle_graph, delete_vertex, local_complement, path_graph

from .conftest import signs_oracle
from .strategies import graph_and_bipartition, graphs

PLUS = np.array([1, 1]) / math.sqrt(2)


class TestGraphState:
    def test_single_qubit(self):
        assert np.allclose(graph_state(Graph.from_edges(1, [])).amplitudes, PLUS)

    def test_k2(self):
        # little-endian: index 3 is |11>
        assert np.allclose(graph_state(complete_graph(2)).amplitudes, [0.5, 0.5, 0.5, -0.5])

    def test_triangle_formula(self):
        s = graph_state(complete_graph(3))
        for x in range(8):
            b = [(x >> q) & 1 for q in range(3)]
            sign = (-1) ** (b[0] * b[1] + b[1] * b[2] + b[0] * b[2])
            assert s.amplitude(b) == pytest.approx(sign / math.sqrt(8))

    @settings(max_examples=30)
    @given(graphs(1, 7))
    def test_matches_sequential_cz(self, g):
        assert np.allclose(graph_state(g).amplitudes, signs_oracle(g))

    @settings(max_examples=20)
    @given(graphs(2, 6), st.randoms())
    def test_cz_order_irrelevant(self, g, r):
        edges = g.edges()
        r.shuffle(edges)
        s = product_state([PLUS] * g.n)
        for u, v in edges:
            s = apply_cz(s, u, v)
        assert np.allclose(s.amplitudes, graph_state(g).amplitudes)

    def test_cap(self):
        with pytest.raises(CapExceededError):
            graph_state(path_graph(15))


class TestStateVector:
    def test_tensor_axes_are_qubits(self):
        s = product_state([np.array([1, 0]), np.array([0, 1])])
        assert s.tensor()[0, 1] == 1
        assert s.amplitudes[2] == 1

    def test_from_tensor_round_trip(self, nprng):
        t = nprng.normal(size=(2, 2, 2)) + 1j * nprng.normal(size=(2, 2, 2))
        assert np.allclose(StateVector.from_tensor(t).tensor(), t)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            StateVector(2, np.ones(3))


class TestGates:
    def test_cz_twice_is_identity(self):
        s = graph_state(cycle_graph(4))
        assert np.allclose(apply_cz(apply_cz(s, 0, 2), 0, 2).amplitudes, s.amplitudes)

    def test_hadamard_on_zero(self):
        s = apply_single_qubit(product_state([np.array([1, 0])]), 0, dense.H)
        assert np.allclose(s.amplitudes, PLUS)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError):
            apply_single_qubit(product_state([PLUS]), 0, np.array([[1, 1], [0, 1]]))

    def test_cz_same_qubit(self):
        with pytest.raises(ValueError):
            apply_cz(graph_state(path_graph(2)), 1, 1)

    @settings(max_examples=40)
    @given(graphs(1, 6), st.data())
    def test_lc_unitaries(self, g, data):
        v = data.draw(st.integers(0, g.n - 1))
        s = graph_state(g)
        for q, u in dense.lc_unitaries(g, v).items():
            s = apply_single_qubit(s, q, u)
        assert dense.equal_up_to_phase(s, graph_state(local_complement(g, v)))
        assert abs(s.norm() - 1) < 1e-9


class TestSchmidt:
    def test_product_state(self):
        s = product_state([np.array([1, 0])] * 4)
        assert schmidt_rank(s, Bipartition.from_side(4, [0, 3])) == 1

    @pytest.mark.parametrize("n", range(2, 8))
    def test_complete_graph_rank_two(self, n):
        s = graph_state(complete_graph(n))
        for mask in range(1, 1 << (n - 1)):
            assert schmidt_rank(s, Bipartition.from_mask(n, mask)) == 2

    def test_six_cycle(self):
        s = graph_state(cycle_graph(6))
        assert schmidt_rank(s, Bipartition.from_side(6, [0, 1, 2])) == 4

    @settings(max_examples=80)
    @given(graph_and_bipartition(2, 8))
    def test_bridge_identity(self, gp):
        g, p = gp
        assert schmidt_rank(graph_state(g), p) == 2 ** cut_rank(g, p)


def random_projector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


class TestMeasurement:
    def test_plus_in_z(self):
        outcome, prob, post = measure_qubit(product_state([PLUS]), 0, "z", outcome=0)
        assert outcome == 0 and prob == pytest.approx(0.5)
        assert np.allclose(post.amplitudes, [1, 0])

    def test_k2_z_outcome_zero(self):
        _, prob, post = measure_qubit(graph_state(complete_graph(2)), 0, "z", outcome=0)
        assert prob == pytest.approx(0.5)
        expected = product_state([np.array([1, 0]), PLUS])
        assert np.allclose(post.amplitudes, expected.amplitudes)

    def test_p3_middle_matches_vertex_deletion(self):
        _, _, post = measure_qubit(graph_state(path_graph(3)), 1, "z", outcome=0)
        reduced, _ = delete_vertex(path_graph(3), 1)
        assert reduced.num_edges == 0
        kept = dense.project_out(post, 1, np.array([1, 0]))
        assert dense.equal_up_to_phase(kept, graph_state(reduced))

    def test_degenerate_branch(self):
        with pytest.raises(DegenerateBranchError):
            measure_qubit(product_state([np.array([1, 0])]), 0, "z", outcome=1)

    def test_sampling_is_seeded(self):
        import random

        s = graph_state(cycle_graph(4))
        a = [measure_qubit(s, 0, "x", rng=random.Random(3))[0] for _ in range(5)]
        b = [measure_qubit(s, 0, "x", rng=random.Random(3))[0] for _ in range(5)]
        assert a == b

    def test_povm_element(self):
        e = PovmElement(0, np.diag([0.25, 0.75]))
        _, prob, _ = measure_qubit(product_state([PLUS]), 0, e)
        assert prob == pytest.approx(0.5)

    def test_povm_validation(self):
        with pytest.raises(ValueError):
            PovmElement(0, np.diag([1.5, 0.0]))
        with pytest.raises(ValueError):
            PovmElement(0, np.array([[0, 1], [0, 0]]))

    @settings(max_examples=40)
    @given(graph_and_bipartition(2, 6), st.data())
    def test_measurement_never_raises_schmidt_rank(self, gp, data):
        g, p = gp
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        q = data.draw(st.integers(0, g.n - 1))
        s = graph_state(g)
        e = PovmElement(q, random_projector(rng))
        try:
            _, _, post = measure_qubit(s, q, e)
        except DegenerateBranchError:
            return
        assert schmidt_rank(post, p) <= schmidt_rank(s, p)

    @settings(max_examples=40)
    @given(graphs(1, 6), st.data())
    def test_projective_outcomes_sum_to_one(self, g, data):
        basis = data.draw(st.sampled_from(["x", "y", "z", 0.7]))
        q = data.draw(st.integers(0, g.n - 1))
        s = graph_state(g)
        total = 0.0
        for vec in dense.basis_vectors(basis):
            elements = [None] * g.n
            elements[q] = dense.projector(vec)
            total += born_probability(s, elements)
        assert total == pytest.approx(1.0, abs=1e-9)


class TestBorn:
    def test_identity(self):
        assert born_probability(graph_state(cycle_graph(5)), [None] * 5) == pytest.approx(1.0)

    def test_plus_projector_zero(self):
        assert born_probability(product_state([PLUS]), [np.diag([1, 0])]) == pytest.approx(0.5)

    def test_triangle_all_zero(self):
        z0 = np.diag([1, 0])
        assert born_probability(graph_state(complete_graph(3)), [z0] * 3) == pytest.approx(1 / 8)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            born_probability(graph_state(path_graph(2)), [None])
