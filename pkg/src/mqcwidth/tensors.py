"""Labelled dense tensors, tensor networks and pairwise contraction sequences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .exceptions import MalformedSequenceError
from .graphs import Graph, crossing_mask
from .widths import TreeLayout

__all__ = [
    "Tensor",
    "TensorNetwork",
    "ContractionSequence",
    "contract_pair",
    "execute_sequence",
    "sequence_from_tree",
    "tree_from_sequence",
    "DEFAULT_ENTRY_CAP",
]

DEFAULT_ENTRY_CAP = 1 << 26

Label = Hashable


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense complex array whose axes are named by distinct ``labels``."""

    labels: tuple[Label, ...]
    data: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        data = np.asarray(self.data, dtype=complex)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels {labels}")
        if data.ndim != len(labels):
            raise ValueError(f"{len(labels)} labels for an array of rank {data.ndim}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> dict[Label, int]:
        return dict(zip(self.labels, self.data.shape))

    @property
    def rank(self) -> int:
        return len(self.labels)

    def transpose(self, order: Sequence[Label]) -> Tensor:
        if set(order) != set(self.labels) or len(order) != len(self.labels):
            raise ValueError(f"{order} is not a permutation of {self.labels}")
        return Tensor(tuple(order), self.data.transpose([self.labels.index(x) for x in order]))

    def array(self, order: Sequence[Label] = ()) -> np.ndarray:
        return self.transpose(order).data if order else self.data

    def scale(self, alpha: complex) -> Tensor:
        return Tensor(self.labels, alpha * self.data)


def contract_pair(a: Tensor, b: Tensor) -> Tensor:
    """Sum over the labels ``a`` and ``b`` share; outer product if they share none.

    The result carries ``a``'s free labels followed by ``b``'s.
    """
    shared = [x for x in a.labels if x in set(b.labels)]
    da, db = a.dims, b.dims
    for x in shared:
        if da[x] != db[x]:
            raise ValueError(f"label {x!r} has extent {da[x]} vs {db[x]}")
    axes_a = [a.labels.index(x) for x in shared]
    axes_b = [b.labels.index(x) for x in shared]
    data = np.tensordot(a.data, b.data, axes=(axes_a, axes_b))
    labels = tuple(x for x in a.labels if x not in shared) + tuple(x for x in b.labels if x not in shared)
    return Tensor(labels, data)


@dataclass(frozen=True, eq=False)
class TensorNetwork:
    """Tensors indexed ``0..len-1``; each label sits on one (open) or two (bond) tensors."""

    tensors: tuple[Tensor, ...]

    def __post_init__(self):
        tensors = tuple(self.tensors)
        object.__setattr__(self, "tensors", tensors)
        owners: dict[Label, list[int]] = {}
        extent: dict[Label, int] = {}
        for i, t in enumerate(tensors):
            for x, d in t.dims.items():
                owners.setdefault(x, []).append(i)
                if extent.setdefault(x, d) != d:
                    raise ValueError(f"label {x!r} has inconsistent extents")
        for x, who in owners.items():
            if len(who) > 2:
                raise ValueError(f"label {x!r} appears on {len(who)} tensors")
        object.__setattr__(self, "_owners", owners)

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def open_labels(self) -> list[Label]:
        return [x for x, who in self._owners.items() if len(who) == 1]

    @property
    def bond_labels(self) -> list[Label]:
        return [x for x, who in self._owners.items() if len(who) == 2]

    def bond_graph(self) -> Graph:
        """Graph on tensor indices with one edge per bond label (parallel bonds merge)."""
        edges = {tuple(sorted(who)) for who in self._owners.values() if len(who) == 2}
        return Graph.from_edges(len(self.tensors), edges)

    def external_bonds(self, members: Iterable[int]) -> int:
        """Bond labels joining the tensor set ``members`` to the rest of the network."""
        s = set(members)
        return sum(1 for who in self._owners.values() if len(who) == 2 and ((who[0] in s) != (who[1] in s)))


@dataclass(frozen=True)
class ContractionSequence:
    """Pairwise merges ``s^i = t1 | t2`` over vertices ``0..n-1``.

    Each operand is a single vertex or an earlier step's set, and is consumed by
    exactly one step; the last step yields all vertices.
    """

    n: int
    steps: tuple[tuple[frozenset[int], frozenset[int]], ...]

    def __post_init__(self):
        steps = tuple((frozenset(a), frozenset(b)) for a, b in self.steps)
        object.__setattr__(self, "steps", steps)
        available = {frozenset([v]) for v in range(self.n)}
        for i, (a, b) in enumerate(steps):
            if a & b:
                raise MalformedSequenceError(f"step {i} merges overlapping sets {sorted(a)}, {sorted(b)}")
            for t in (a, b):
                if t not in available:
                    raise MalformedSequenceError(f"step {i} operand {sorted(t)} is not available")
                available.discard(t)
            available.add(a | b)
        if self.n and available != {frozenset(range(self.n))}:
            raise MalformedSequenceError("sequence does not end with the full vertex set")

    @property
    def sets(self) -> list[frozenset[int]]:
        return [a | b for a, b in self.steps]

    def ranks(self, g: Graph) -> list[int]:
        """L^i: graph edges leaving each step set."""
        return [crossing_mask(g, sum(1 << v for v in s)) for s in self.sets]

    def max_rank(self, g: Graph) -> int:
        """L^max including the initial single-vertex tensors."""
        return max(self.ranks(g) + [g.degree(v) for v in range(g.n)])

    def to_json(self) -> dict:
        return {"n": self.n, "steps": [[sorted(a), sorted(b)] for a, b in self.steps]}

    @classmethod
    def from_json(cls, data: dict) -> ContractionSequence:
        return cls(int(data["n"]), tuple((frozenset(a), frozenset(b)) for a, b in data["steps"]))


def execute_sequence(
    net: TensorNetwork,
    seq: ContractionSequence,
    entry_cap: int = DEFAULT_ENTRY_CAP,
) -> tuple[Tensor, int, list[int]]:
    """Contract ``net`` in the order given by ``seq``.

    Returns the final tensor, L^max and the per-step ranks L^i, where a rank
    counts bond labels to tensors outside the current set.  L^max also covers the
    initial tensors.
    """
    if seq.n != len(net):
        raise MalformedSequenceError(f"sequence covers {seq.n} tensors, network has {len(net)}")
    bonds = set(net.bond_labels)
    current: dict[frozenset[int], Tensor] = {frozenset([i]): t for i, t in enumerate(net.tensors)}
    l_max = max((sum(x in bonds for x in t.labels) for t in net.tensors), default=0)
    trace: list[int] = []
    for i, (a, b) in enumerate(seq.steps):
        ta, tb = current.pop(a), current.pop(b)
        shared = set(ta.labels) & set(tb.labels)
        dims = {**ta.dims, **tb.dims}
        entries = int(np.prod([dims[x] for x in dims if x not in shared], dtype=object))
        if entries > entry_cap:
            raise MemoryError(
                f"step {i} ({sorted(a)} + {sorted(b)}) would materialise {entries} entries (cap {entry_cap})"
            )
        out = contract_pair(ta, tb)
        current[a | b] = out
        rank = sum(x in bonds for x in out.labels)
        trace.append(rank)
        l_max = max(l_max, rank)
    (result,) = current.values()
    return result, l_max, trace


def sequence_from_tree(tree: TreeLayout, root_edge: tuple[int, int] | None = None) -> ContractionSequence:
    """Post-order merge sequence of ``tree`` rooted at its degree-2 vertex."""
    rooted = tree.rooted(root_edge)
    members: dict[int, frozenset[int]] = {}
    steps = []
    for v in rooted.postorder():
        if tree.is_leaf(v):
            members[v] = frozenset([v])
            continue
        c1, c2 = rooted.children[v]
        steps.append((members[c1], members[c2]))
        members[v] = members[c1] | members[c2]
    return ContractionSequence(tree.leaves, tuple(steps))


def tree_from_sequence(seq: ContractionSequence) -> TreeLayout:
    """Tree whose non-root subtrees are the step sets; the root is then suppressed."""
    if seq.n < 2:
        raise MalformedSequenceError("a tree layout needs at least 2 vertices")
    node: dict[frozenset[int], int] = {frozenset([v]): v for v in range(seq.n)}
    edges: list[tuple[int, int]] = []
    last = len(seq.steps) - 1
    for i, (a, b) in enumerate(seq.steps):
        if i == last:
            edges.append((node[a], node[b]))
            break
        w = seq.n + i
        edges.append((w, node[a]))
        edges.append((w, node[b]))
        node[a | b] = w
    return TreeLayout(seq.n, tuple(edges))
