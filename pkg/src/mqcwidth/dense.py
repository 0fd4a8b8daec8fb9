"""Exact state vectors for small qubit counts.

Basis ordering is little-endian throughout: qubit ``q`` is bit ``q`` of the
basis-state index, so ``amplitudes[sum(x[q] << q)]`` is the coefficient of
``|x_0 x_1 ... x_{n-1}>``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import CapExceededError, DegenerateBranchError
from .graphs import Bipartition, Graph

__all__ = [
    "StateVector",
    "PovmElement",
    "DEFAULT_DENSE_CAP",
    "graph_state",
    "product_state",
    "schmidt_rank",
    "apply_single_qubit",
    "apply_cz",
    "measure_qubit",
    "born_probability",
    "basis_vectors",
    "projector",
    "lc_unitaries",
    "equal_up_to_phase",
]

DEFAULT_DENSE_CAP = 14
_NORM_TOL = 1e-9

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 1 << self.n:
            raise ValueError(f"expected {1 << self.n} amplitudes for {self.n} qubits, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self) -> np.ndarray:
        """View with axis ``q`` indexing qubit ``q``."""
        return self.amplitudes.reshape((2,) * self.n).transpose(tuple(range(self.n - 1, -1, -1)))

    @classmethod
    def from_tensor(cls, t: np.ndarray) -> StateVector:
        n = t.ndim
        return cls(n, np.ascontiguousarray(t.transpose(tuple(range(n - 1, -1, -1)))).reshape(-1))

    def amplitude(self, bits: Sequence[int]) -> complex:
        return complex(self.amplitudes[sum(int(b) << q for q, b in enumerate(bits))])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> StateVector:
        return StateVector(self.n, self.amplitudes / self.norm())


@dataclass(frozen=True, eq=False)
class PovmElement:
    """A single-qubit effect 0 <= E <= I acting on ``qubit``."""

    qubit: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("POVM element must be 2x2")
        if not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValueError("POVM element must be Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev.min() < -1e-12 or ev.max() > 1 + 1e-12:
            raise ValueError(f"POVM element eigenvalues {ev} outside [0, 1]")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, qubit: int) -> PovmElement:
        return cls(qubit, I2)

    def kraus(self) -> np.ndarray:
        ev, vecs = np.linalg.eigh(self.matrix)
        return (vecs * np.sqrt(np.clip(ev, 0, None))) @ vecs.conj().T


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise CapExceededError(f"{n} qubits exceeds the dense-state cap {cap}")


def _sign_vector(n: int, edges) -> np.ndarray:
    idx = np.arange(1 << n)
    parity = np.zeros(1 << n, dtype=np.int64)
    for u, v in edges:
        parity ^= (idx >> u) & (idx >> v) & 1
    return 1 - 2 * parity


def graph_state(g: Graph, cap: int = DEFAULT_DENSE_CAP) -> StateVector:
    """|+>^n followed by one CZ per edge: amplitude 2^(-n/2) (-1)^(sum over edges x_u x_v)."""
    _check_cap(g.n, cap)
    amps = _sign_vector(g.n, g.edges()).astype(complex) / np.sqrt(2.0**g.n)
    return StateVector(g.n, amps)


def product_state(vectors: Sequence[np.ndarray]) -> StateVector:
    """Tensor product with ``vectors[q]`` on qubit ``q``."""
    amps = np.array([1.0 + 0j])
    for vec in vectors:
        amps = np.kron(np.asarray(vec, dtype=complex), amps)
    return StateVector(len(vectors), amps)


def schmidt_coefficients(s: StateVector, p: Bipartition) -> np.ndarray:
    a = sorted(p.side_a)
    b = sorted(p.side_b)
    if sorted(a + b) != list(range(s.n)):
        raise ValueError("bipartition does not match the state's qubits")
    mat = s.tensor().transpose(a + b).reshape(1 << len(a), 1 << len(b))
    return np.linalg.svd(mat, compute_uv=False)


def schmidt_rank(s: StateVector, p: Bipartition, tol: float = 1e-10) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    sv = schmidt_coefficients(s, p)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def _apply_matrix(t: np.ndarray, q: int, u: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)


def _check_qubit(s: StateVector, q: int) -> None:
    if not 0 <= q < s.n:
        raise IndexError(f"qubit {q} out of range for {s.n} qubits")


def apply_single_qubit(s: StateVector, q: int, u: np.ndarray) -> StateVector:
    _check_qubit(s, q)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not np.allclose(u.conj().T @ u, I2, atol=_NORM_TOL):
        raise ValueError("single-qubit gate must be a 2x2 unitary")
    return StateVector.from_tensor(_apply_matrix(s.tensor(), q, u))


def apply_cz(s: StateVector, q1: int, q2: int) -> StateVector:
    _check_qubit(s, q1)
    _check_qubit(s, q2)
    if q1 == q2:
        raise ValueError("CZ needs two distinct qubits")
    return StateVector(s.n, s.amplitudes * _sign_vector(s.n, [(q1, q2)]))


def basis_vectors(basis) -> tuple[np.ndarray, np.ndarray]:
    """Outcome-0 and outcome-1 vectors for ``"x"``, ``"y"``, ``"z"`` or an XY-plane angle.

    An angle ``theta`` stands for the basis (|0> +- e^{i theta}|1>)/sqrt(2).
    """
    if isinstance(basis, str):
        key = basis.strip().lower()
        if key == "z":
            return np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
        if key == "x":
            basis = 0.0
        elif key == "y":
            basis = np.pi / 2
        elif key.startswith("angle"):
            basis = float(key.split()[1])
        else:
            raise ValueError(f"unknown measurement basis {basis!r}")
    theta = float(basis)
    phase = np.exp(1j * theta)
    return (
        np.array([1, phase], dtype=complex) / np.sqrt(2),
        np.array([1, -phase], dtype=complex) / np.sqrt(2),
    )


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def measure_qubit(
    s: StateVector,
    q: int,
    basis,
    rng: random.Random | None = None,
    outcome: int | None = None,
) -> tuple[int, float, StateVector]:
    """Measure qubit ``q`` and return ``(outcome, probability, post_state)``.

    ``basis`` is a basis name/angle (two outcomes) or a :class:`PovmElement`
    (single effect, outcome reported as 0, post-state from its square root).
    With ``outcome`` given the branch is forced; otherwise it is drawn from ``rng``
    (seed 0 by default).
    """
    _check_qubit(s, q)
    t = s.tensor()
    if isinstance(basis, PovmElement):
        branches = [basis.kraus()]
    else:
        branches = [projector(v) for v in basis_vectors(basis)]
    posts = [_apply_matrix(t, q, k) for k in branches]
    probs = [float(np.vdot(p, p).real) for p in posts]
    if outcome is None:
        rng = rng if rng is not None else random.Random(0)
        r = rng.random()
        outcome = 0 if len(probs) == 1 or r < probs[0] else 1
    elif outcome not in range(len(branches)):
        raise ValueError(f"outcome {outcome} not available for this measurement")
    prob = probs[outcome]
    if prob < 1e-12:
        raise DegenerateBranchError(f"outcome {outcome} on qubit {q} has probability {prob:.3g}")
    post = StateVector.from_tensor(posts[outcome] / np.sqrt(prob))
    return outcome, prob, post


def born_probability(s: StateVector, elements: Sequence[PovmElement | np.ndarray | None]) -> float:
    """tr(E rho) for a product effect; ``None`` entries mean identity."""
    if len(elements) != s.n:
        raise ValueError(f"need one element per qubit ({s.n}), got {len(elements)}")
    t = s.tensor()
    out = t
    for q, e in enumerate(elements):
        if e is None:
            continue
        m = e.matrix if isinstance(e, PovmElement) else np.asarray(e, dtype=complex)
        out = _apply_matrix(out, q, m)
    return float(np.vdot(t, out).real)


def append_plus(s: StateVector) -> StateVector:
    """Add a fresh |+> as the new highest-index qubit."""
    return StateVector(s.n + 1, np.concatenate([s.amplitudes, s.amplitudes]) / np.sqrt(2))


def project_out(s: StateVector, q: int, vec: np.ndarray) -> StateVector:
    """Contract qubit ``q`` with <vec|; the result is unnormalised with n-1 qubits."""
    _check_qubit(s, q)
    t = np.tensordot(np.asarray(vec, dtype=complex).conj(), s.tensor(), axes=([0], [q]))
    if s.n == 1:
        return StateVector(0, np.array([complex(t)]))
    return StateVector.from_tensor(t)


def lc_unitaries(g: Graph, v: int) -> dict[int, np.ndarray]:
    """Local Cliffords mapping graph_state(g) to graph_state(local_complement(g, v)).

    sqrt(-iX) on ``v`` and sqrt(iZ) on each neighbour, up to a global phase.
    """
    rx = (I2 - 1j * X) / np.sqrt(2)
    rz = np.diag([np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 4)])
    ops = {v: rx}
    for u in g.neighbors(v):
        ops[u] = rz
    return ops


def equal_up_to_phase(a: StateVector, b: StateVector, atol: float = 1e-9) -> bool:
    if a.n != b.n:
        return False
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    if abs(overlap) < 1e-15:
        return False
    phase = overlap / abs(overlap)
    return bool(np.allclose(a.amplitudes * phase, b.amplitudes, atol=atol))
