"""Exact width parameters of graph states and what they say about simulating them.

Submodules: ``graphs`` (graphs, cut-rank, local complementation), ``widths``
(tree layouts, carving width, rank width, treewidth), ``dense`` (state vectors),
``tensors`` (labelled tensors and contraction sequences), ``ttn`` (tree tensor
networks), ``mqc`` (circuits, measurement patterns, graph-state networks),
``bounds`` (inequality checks and reports) and ``cli``.
"""

from .exceptions import CapExceededError, DegenerateBranchError, ExtractionStallError, MalformedSequenceError
from .graphs import Bipartition, Graph, cut_rank, crossing_edges, local_complement
from .widths import TreeLayout, carving_width, rank_width, treewidth
from .dense import StateVector, PovmElement, graph_state, schmidt_rank
from .tensors import ContractionSequence, Tensor, TensorNetwork, execute_sequence
from .ttn import TTN, ttn_from_dense
from .mqc import CircuitIR, MeasurementPattern, compile_to_pattern, peps_tensors, probability_network
from .bounds import BoundsReport, extract_pairs, run_suite

__version__ = "0.1.0"

__all__ = [
    "CapExceededError",
    "DegenerateBranchError",
    "ExtractionStallError",
    "MalformedSequenceError",
    "Bipartition",
    "Graph",
    "cut_rank",
    "crossing_edges",
    "local_complement",
    "TreeLayout",
    "carving_width",
    "rank_width",
    "treewidth",
    "StateVector",
    "PovmElement",
    "graph_state",
    "schmidt_rank",
    "ContractionSequence",
    "Tensor",
    "TensorNetwork",
    "execute_sequence",
    "TTN",
    "ttn_from_dense",
    "CircuitIR",
    "MeasurementPattern",
    "compile_to_pattern",
    "peps_tensors",
    "probability_network",
    "BoundsReport",
    "extract_pairs",
    "run_suite",
]
