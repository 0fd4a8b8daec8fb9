"""Exact tree tensor networks built by recursive Schmidt decomposition.

Every tree vertex carries a tensor.  A leaf ``q`` holds a ``(2, r)`` isometry from
its physical index to its bond; an internal vertex holds an ``(r_left, r_right, r)``
isometry; the degree-2 root holds the ``(r_left, r_right)`` coefficient matrix.
Bond ``("b", v)`` joins ``v`` to its parent and spans the Schmidt basis of the
qubits below ``v``.  Non-root tensors are isometric toward the root, so the root
carries all the weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import DEFAULT_DENSE_CAP, PovmElement, StateVector, basis_vectors, projector
from .exceptions import CapExceededError, DegenerateBranchError
from .tensors import Tensor
from .widths import RootedTree, TreeLayout

__all__ = [
    "TTN",
    "ttn_from_dense",
    "ttn_amplitude",
    "ttn_to_dense",
    "ttn_measure_qubit",
    "ttn_bond_dims",
]


def _bits_of(mask: int) -> list[int]:
    return [q for q in range(mask.bit_length()) if (mask >> q) & 1]


@dataclass(frozen=True, eq=False)
class TTN:
    tree: TreeLayout
    rooted: RootedTree
    tensors: dict[int, Tensor]

    @property
    def n(self) -> int:
        return self.tree.leaves

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def bond_dim(self, v: int) -> int:
        """Dimension of the bond between ``v`` and its parent."""
        return self.tensors[v].data.shape[-1]


def _labels(rooted: RootedTree, leaves: int, v: int) -> tuple:
    if v < leaves:
        return (("p", v), ("b", v))
    kids = tuple(("b", c) for c in rooted.children[v])
    return kids if v == rooted.root else kids + (("b", v),)


def _schmidt_basis(s: StateVector, qubits: list[int], tol: float) -> np.ndarray:
    rest = [q for q in range(s.n) if q not in qubits]
    mat = s.tensor().transpose(qubits + rest).reshape(1 << len(qubits), -1)
    u, sv, _ = np.linalg.svd(mat, full_matrices=False)
    rank = int(np.sum(sv > tol * sv[0]))
    return u[:, :rank]


def _regroup(vec_block: np.ndarray, qubits: list[int], left: list[int], right: list[int]) -> np.ndarray:
    """Rows indexed by ``qubits`` (C order) -> array (2^|left|, 2^|right|, cols)."""
    cols = vec_block.shape[1]
    t = vec_block.reshape((2,) * len(qubits) + (cols,))
    perm = [qubits.index(q) for q in left + right] + [len(qubits)]
    return t.transpose(perm).reshape(1 << len(left), 1 << len(right), cols)


def ttn_from_dense(
    s: StateVector,
    tree: TreeLayout,
    root_edge: tuple[int, int] | None = None,
    tol: float = 1e-10,
    cap: int = DEFAULT_DENSE_CAP,
) -> TTN:
    """Untruncated TTN of ``s`` along ``tree``; ``tol`` only guards rank detection."""
    if s.n > cap:
        raise CapExceededError(f"{s.n} qubits exceeds the dense-state cap {cap}")
    if s.n != tree.leaves:
        raise ValueError(f"state has {s.n} qubits, tree has {tree.leaves} leaves")
    rooted = tree.rooted(root_edge)
    qubits = {v: _bits_of(m) for v, m in rooted.leaf_masks.items()}
    bases: dict[int, np.ndarray] = {}
    tensors: dict[int, Tensor] = {}
    for v in rooted.postorder():
        if v == rooted.root:
            c1, c2 = rooted.children[v]
            psi = s.tensor().reshape(-1, 1)
            block = _regroup(psi, list(range(s.n)), qubits[c1], qubits[c2])[:, :, 0]
            data = bases[c1].conj().T @ block @ bases[c2].conj()
        else:
            bases[v] = _schmidt_basis(s, qubits[v], tol)
            if tree.is_leaf(v):
                data = bases[v]
            else:
                c1, c2 = rooted.children[v]
                block = _regroup(bases[v], qubits[v], qubits[c1], qubits[c2])
                data = np.einsum("xa,yb,xyc->abc", bases[c1].conj(), bases[c2].conj(), block)
        tensors[v] = Tensor(_labels(rooted, tree.leaves, v), data)
    return TTN(tree, rooted, tensors)


def _subtree_vectors(ttn: TTN, bits=None) -> dict[int, np.ndarray]:
    """Contract every subtree with the physical indices fixed to ``bits``."""
    rooted = ttn.rooted
    out: dict[int, np.ndarray] = {}
    for v in rooted.postorder():
        data = ttn.tensors[v].data
        if ttn.tree.is_leaf(v):
            out[v] = data[bits[v]]
            continue
        c1, c2 = rooted.children[v]
        spec = "a,b,ab->" if v == rooted.root else "a,b,abc->c"
        out[v] = np.einsum(spec, out[c1], out[c2], data)
    return out


def ttn_amplitude(ttn: TTN, bits) -> complex:
    """Coefficient of the computational basis state ``bits`` (bit q for qubit q)."""
    bits = [int(b) for b in bits]
    if len(bits) != ttn.n:
        raise ValueError(f"expected {ttn.n} bits, got {len(bits)}")
    return complex(_subtree_vectors(ttn, bits)[ttn.rooted.root])


def ttn_to_dense(ttn: TTN) -> StateVector:
    """Contract the whole network into a state vector."""
    rooted = ttn.rooted
    blocks: dict[int, tuple[np.ndarray, list[int]]] = {}
    for v in rooted.postorder():
        data = ttn.tensors[v].data
        if ttn.tree.is_leaf(v):
            blocks[v] = (data, [v])
            continue
        (left, lq), (right, rq) = (blocks[c] for c in rooted.children[v])
        if v == rooted.root:
            block = np.einsum("xa,yb,ab->xy", left, right, data).reshape(-1, 1)
        else:
            block = np.einsum("xa,yb,abc->xyc", left, right, data).reshape(-1, data.shape[2])
        blocks[v] = (block, lq + rq)
    vec, order = blocks[rooted.root]
    t = vec.reshape((2,) * ttn.n).transpose([order.index(q) for q in range(ttn.n)])
    return StateVector.from_tensor(t)


def ttn_bond_dims(ttn: TTN) -> dict[tuple[int, int], int]:
    """Bond dimension per layout edge (the root's two bonds share the split edge)."""
    return {ttn.rooted.original_edge(v): ttn.bond_dim(v) for v in ttn.rooted.parent}


def _absorb(parent: np.ndarray, slot: int, r: np.ndarray) -> np.ndarray:
    """Contract ``r`` (new x old) into axis ``slot`` of ``parent``."""
    moved = np.tensordot(r, parent, axes=([1], [slot]))
    return np.moveaxis(moved, 0, slot)


def ttn_measure_qubit(
    ttn: TTN,
    q: int,
    effect,
    outcome: int | None = None,
    tol: float = 1e-10,
) -> tuple[float, TTN]:
    """Apply a single-qubit effect to leaf ``q``; returns (probability, post-measurement TTN).

    ``effect`` is a :class:`PovmElement` or a basis name/angle, in which case
    ``outcome`` selects the projector.  The isometric gauge is restored along the
    leaf-to-root path, then a top-down sweep trims every bond to the exact Schmidt
    rank of the updated state.
    """
    if not 0 <= q < ttn.n:
        raise IndexError(f"qubit {q} out of range for {ttn.n} qubits")
    if isinstance(effect, PovmElement):
        kraus = effect.kraus()
    else:
        if outcome is None:
            raise ValueError("a basis measurement needs an explicit outcome")
        kraus = projector(basis_vectors(effect)[outcome])
    rooted = ttn.rooted
    data = {v: t.data.copy() for v, t in ttn.tensors.items()}
    data[q] = kraus @ data[q]

    v = q
    while v != rooted.root:
        p = rooted.parent[v]
        a = data[v]
        mat = a.reshape(-1, a.shape[-1])
        u, sv, vh = np.linalg.svd(mat, full_matrices=False)
        keep = max(int(np.sum(sv > 1e-14 * sv[0])), 1) if sv[0] > 0 else 1
        data[v] = u[:, :keep].reshape(a.shape[:-1] + (keep,))
        data[p] = _absorb(data[p], rooted.children[p].index(v), sv[:keep, None] * vh[:keep])
        v = p

    prob = float(np.vdot(data[rooted.root], data[rooted.root]).real)
    if prob < 1e-12:
        raise DegenerateBranchError(f"measurement on qubit {q} has probability {prob:.3g}")
    data[rooted.root] = data[rooted.root] / np.sqrt(prob)

    # top-down: env[v] is a factor L with rho_v = L L^dagger on the bond above v
    env: dict[int, np.ndarray] = {}
    order = rooted.postorder()[::-1]
    for v in order:
        if ttn.tree.is_leaf(v):
            continue
        t = data[v]
        for slot, c in enumerate(rooted.children[v]):
            if v == rooted.root:
                m = np.moveaxis(t, slot, 0).reshape(t.shape[slot], -1)
            else:
                weighted = np.tensordot(t, env[v], axes=([2], [0]))
                m = np.moveaxis(weighted, slot, 0).reshape(t.shape[slot], -1)
            w, sv, _ = np.linalg.svd(m, full_matrices=False)
            keep = int(np.sum(sv > tol * sv[0]))
            w = w[:, :keep]
            child = data[c]
            data[c] = np.tensordot(child, w, axes=([child.ndim - 1], [0]))
            t = _absorb(t, slot, w.conj().T)
            env[c] = np.diag(sv[:keep])
        data[v] = t

    tensors = {v: Tensor(_labels(rooted, ttn.n, v), d) for v, d in data.items()}
    return prob, TTN(ttn.tree, rooted, tensors)
