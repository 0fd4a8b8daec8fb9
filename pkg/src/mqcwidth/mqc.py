"""Circuits, their measurement-based compilation, and graph-state tensor networks.

Circuits act on |+> inputs (the graph-state convention).  Each logical qubit is
carried by a chain of physical qubits; a teleportation step measures the current
chain qubit in the XY-plane basis (|0> +- e^{i theta}|1>)/sqrt(2) and moves the
state to the next qubit as X^s J(-theta) with J(a) = H diag(1, e^{ia}).  Pauli
byproducts are tracked as parity domains over earlier outcomes:

* a teleport through qubit ``a`` flips its angle sign by the X-parity of ``a`` and
  maps the domains (X, Z) of ``a`` to (Z + {a}, X) on the next qubit;
* a CZ between chain heads adds each side's X-domain to the other's Z-domain.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import dense
from .dense import PovmElement, StateVector, basis_vectors
from .graphs import Graph, delete_vertex
from .tensors import Tensor, TensorNetwork
from .widths import DEFAULT_EXACT_CAP, DEFAULT_TREE_CAP, TreeLayout, branch_width

__all__ = [
    "SingleQubitGate",
    "CZGate",
    "CircuitIR",
    "CircuitGraph",
    "PlannedMeasurement",
    "OutputCorrection",
    "MeasurementPattern",
    "build_circuit_graph",
    "circuit_carving_width",
    "compile_to_pattern",
    "j_angles",
    "peps_tensors",
    "probability_network",
    "insert_output_qubits",
    "suppress_degree2",
    "circuit_state",
    "circuit_distribution",
    "pattern_branches",
    "pattern_distribution",
    "pattern_distribution_network",
    "pattern_output_states",
    "random_circuit",
    "sample_circuits",
    "total_variation",
]

_ANGLE_TOL = 1e-9
H = dense.H


def _rz(a: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * a)])


def _j(a: float) -> np.ndarray:
    return H @ _rz(a)


# circuits


@dataclass(frozen=True, eq=False)
class SingleQubitGate:
    target: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2) or not np.allclose(m.conj().T @ m, np.eye(2), atol=1e-9):
            raise ValueError("single-qubit gate must be a 2x2 unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,)


@dataclass(frozen=True)
class CZGate:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise ValueError("CZ needs two distinct qubits")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)


_BASES = ("x", "y", "z")


@dataclass(frozen=True, eq=False)
class CircuitIR:
    """Gate list over ``qubits`` logical qubits prepared in |+>."""

    qubits: int
    gates: tuple = ()
    measure: tuple[str, ...] = ()

    def __post_init__(self):
        gates = tuple(self.gates)
        measure = tuple(self.measure) or ("z",) * self.qubits
        if len(measure) != self.qubits:
            raise ValueError(f"need one final measurement per qubit, got {len(measure)}")
        for b in measure:
            if b not in _BASES:
                raise ValueError(f"unsupported final measurement basis {b!r}")
        for g in gates:
            if any(not 0 <= q < self.qubits for q in g.qubits):
                raise ValueError(f"gate on {g.qubits} out of range for {self.qubits} qubits")
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "measure", measure)

    def prefix(self, k: int) -> CircuitIR:
        return CircuitIR(self.qubits, self.gates[:k], self.measure)

    def to_json(self) -> dict:
        gates = []
        for g in self.gates:
            if isinstance(g, CZGate):
                gates.append({"kind": "cz", "targets": [g.control, g.target]})
            else:
                flat = [[float(z.real), float(z.imag)] for z in g.matrix.reshape(-1)]
                gates.append({"kind": "u", "target": g.target, "matrix": flat})
        return {"qubits": self.qubits, "gates": gates, "measure": list(self.measure)}

    @classmethod
    def from_json(cls, data: Mapping) -> CircuitIR:
        try:
            gates = []
            for g in data["gates"]:
                if g["kind"] == "cz":
                    a, b = g["targets"]
                    gates.append(CZGate(int(a), int(b)))
                elif g["kind"] == "u":
                    entries = [complex(re, im) for re, im in g["matrix"]]
                    gates.append(SingleQubitGate(int(g["target"]), np.array(entries).reshape(2, 2)))
                else:
                    raise ValueError(f"unknown gate kind {g['kind']!r}")
            return cls(int(data["qubits"]), tuple(gates), tuple(data.get("measure", ())))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed circuit JSON: {exc}") from exc


def circuit_state(c: CircuitIR, prefix: int | None = None) -> StateVector:
    """Dense state after the first ``prefix`` gates (all gates by default)."""
    s = dense.product_state([np.array([1, 1]) / np.sqrt(2)] * c.qubits)
    for g in c.gates[: len(c.gates) if prefix is None else prefix]:
        if isinstance(g, CZGate):
            s = dense.apply_cz(s, g.control, g.target)
        else:
            s = dense.apply_single_qubit(s, g.target, g.matrix)
    return s


def _distribution(s: StateVector, bases: Sequence[str]) -> dict[tuple[int, ...], float]:
    t = s.tensor()
    for q, b in enumerate(bases):
        v0, v1 = basis_vectors(b)
        rot = np.array([v0.conj(), v1.conj()])
        t = np.moveaxis(np.tensordot(rot, t, axes=([1], [q])), 0, q)
    probs = np.abs(t) ** 2
    return {idx: float(probs[idx]) for idx in itertools.product((0, 1), repeat=s.n)}


def circuit_distribution(c: CircuitIR) -> dict[tuple[int, ...], float]:
    """Exact output distribution; keys hold the outcome of qubit q at position q."""
    return _distribution(circuit_state(c), c.measure)


def total_variation(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def random_circuit(rng: random.Random, qubits: int, gates: int, cz_prob: float = 0.4) -> CircuitIR:
    """Random mix of CZs and single-qubit gates (H, S, T, X or Haar-random)."""
    fixed = {
        "h": H,
        "s": _rz(math.pi / 2),
        "t": _rz(math.pi / 4),
        "x": dense.X,
    }
    out = []
    for _ in range(gates):
        if qubits > 1 and rng.random() < cz_prob:
            a, b = rng.sample(range(qubits), 2)
            out.append(CZGate(a, b))
            continue
        kind = rng.choice(["h", "s", "t", "x", "haar", "haar"])
        if kind == "haar":
            z = np.array([[complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(2)] for _ in range(2)])
            qm, r = np.linalg.qr(z)
            m = qm * (np.diag(r) / np.abs(np.diag(r)))
        else:
            m = fixed[kind]
        out.append(SingleQubitGate(rng.randrange(qubits), m))
    measure = tuple(rng.choice(_BASES) for _ in range(qubits))
    return CircuitIR(qubits, tuple(out), measure)


def sample_circuits(
    seed: int,
    count: int,
    max_qubits: int = 4,
    max_gates: int = 6,
    pattern_cap: int = DEFAULT_EXACT_CAP,
    min_qubits: int = 2,
) -> list[CircuitIR]:
    """Seeded random circuits whose circuit graph is connected and whose pattern fits ``pattern_cap``.

    Rejection sampling keeps every width of the corpus exactly computable.
    """
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        c = random_circuit(rng, rng.randint(min_qubits, max_qubits), rng.randint(1, max_gates))
        if not build_circuit_graph(c).graph.is_connected():
            continue
        if compile_to_pattern(c).graph.n > pattern_cap:
            continue
        out.append(c)
    return out


# circuit graph


@dataclass(frozen=True)
class CircuitGraph:
    """Vertex per input, gate and final measurement; one edge per wire segment.

    ``edges`` may repeat a pair when two consecutive CZs act on the same qubits.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    roles: tuple[str, ...]

    @property
    def graph(self) -> Graph:
        return Graph.from_edges(self.n, set(self.edges))

    def degree(self, v: int) -> int:
        return sum((a == v) + (b == v) for a, b in self.edges)

    def crossing(self, mask: int) -> int:
        return sum(((mask >> a) & 1) != ((mask >> b) & 1) for a, b in self.edges)


def build_circuit_graph(c: CircuitIR) -> CircuitGraph:
    roles = ["input"] * c.qubits
    last = list(range(c.qubits))
    edges = []
    for g in c.gates:
        v = len(roles)
        roles.append("2q-gate" if isinstance(g, CZGate) else "1q-gate")
        for q in g.qubits:
            edges.append((last[q], v))
            last[q] = v
    for q in range(c.qubits):
        v = len(roles)
        roles.append("output-measurement")
        edges.append((last[q], v))
    return CircuitGraph(len(roles), tuple(edges), tuple(roles))


def circuit_carving_width(
    cg: CircuitGraph,
    method: str | None = None,
    tree_cap: int = DEFAULT_TREE_CAP,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> tuple[int, TreeLayout]:
    """Carving width of the (multi)graph, counting parallel wires separately."""
    if not cg.graph.is_connected():
        raise ValueError("circuit graph is disconnected; compute widths per component")
    return branch_width(cg.n, cg.crossing, method, tree_cap, exact_cap)


# single-qubit gates as teleportation steps


def _zxz(u: np.ndarray) -> tuple[float, float, float]:
    """Angles (a, b, c) with u proportional to Rz(a) Rx(b) Rz(c), Rx(b) = H Rz(b) H.

    Degenerate cases put the free angle into ``c``.
    """
    v = u / np.sqrt(np.linalg.det(u))
    b = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[1, 0]) < _ANGLE_TOL:
        return 0.0, 0.0, 2 * float(np.angle(v[1, 1]))
    if abs(v[0, 0]) < _ANGLE_TOL:
        return 0.0, math.pi, -2 * float(np.angle(1j * v[1, 0]))
    s = 2 * float(np.angle(v[1, 1]))
    d = 2 * float(np.angle(1j * v[1, 0]))
    return (s + d) / 2, b, (s - d) / 2


def _is_zero_angle(a: float) -> bool:
    return abs(math.remainder(a, 2 * math.pi)) < _ANGLE_TOL


def _proportional(a: np.ndarray, b: np.ndarray) -> bool:
    overlap = np.vdot(b, a)
    if abs(overlap) < 1e-12:
        return False
    return bool(np.allclose(a, b * overlap / abs(overlap), atol=1e-9))


def j_angles(u: np.ndarray) -> list[float]:
    """Angles a_1..a_k (k <= 3) with J(a_k)...J(a_1) proportional to ``u``.

    Identity needs none, H diag(...) one, Rx Rz two, anything else three.
    """
    u = np.asarray(u, dtype=complex)
    if _proportional(u, np.eye(2)):
        return []
    hu = H @ u
    if abs(hu[0, 1]) < _ANGLE_TOL and abs(hu[1, 0]) < _ANGLE_TOL:
        return [float(np.angle(hu[1, 1] / hu[0, 0]))]
    a, b, c = _zxz(u)
    if _is_zero_angle(a):
        return [c, b]
    a, b, c = _zxz(hu)
    return [c, b, a]


# measurement patterns


@dataclass(frozen=True)
class PlannedMeasurement:
    """Measure ``qubit`` in ``basis`` (``"z"`` or an XY-plane angle).

    For XY-plane measurements the applied angle is ``(-1)^p * angle`` where ``p``
    is the outcome parity over ``s_domain``.
    """

    qubit: int
    basis: str
    angle: float = 0.0
    s_domain: frozenset[int] = frozenset()

    def to_json(self) -> dict:
        if self.basis == "z":
            label = "z"
        elif self.angle == 0.0:
            label = "x"
        else:
            label = f"angle {self.angle!r}"
        return {"qubit": self.qubit, "basis": label, "s_domain": sorted(self.s_domain)}

    @classmethod
    def from_json(cls, data: Mapping) -> PlannedMeasurement:
        label = str(data["basis"]).strip()
        dom = frozenset(int(x) for x in data.get("s_domain", ()))
        if label == "z":
            return cls(int(data["qubit"]), "z", 0.0, dom)
        if label == "x":
            angle = 0.0
        elif label == "y":
            angle = math.pi / 2
        elif label.startswith("angle"):
            angle = float(label.split()[1])
        else:
            raise ValueError(f"unknown plan basis {label!r}")
        return cls(int(data["qubit"]), "xy", angle, dom)


@dataclass(frozen=True)
class OutputCorrection:
    """An output holds X^px Z^pz C |psi> where px, pz are parities over the domains."""

    x_domain: frozenset[int] = frozenset()
    z_domain: frozenset[int] = frozenset()
    clifford: str = "I"

    def to_json(self) -> dict:
        return {"x": sorted(self.x_domain), "z": sorted(self.z_domain), "clifford": self.clifford}

    @classmethod
    def from_json(cls, data: Mapping) -> OutputCorrection:
        return cls(frozenset(data.get("x", ())), frozenset(data.get("z", ())), data.get("clifford", "I"))


@dataclass(frozen=True)
class FrontierEntry:
    """Chain head after a gate prefix, with its byproduct domains at that time."""

    qubit: int
    x_domain: frozenset[int]
    z_domain: frozenset[int]


@dataclass(frozen=True, eq=False)
class MeasurementPattern:
    graph: Graph
    chains: tuple[tuple[int, ...], ...]
    plan: tuple[PlannedMeasurement, ...]
    outputs: tuple[int, ...]
    output_bases: tuple[str, ...] = ()
    corrections: tuple[OutputCorrection, ...] = ()
    frontiers: tuple[tuple[FrontierEntry, ...], ...] = ()
    edge_gates: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        planned = [m.qubit for m in self.plan]
        if len(set(planned)) != len(planned):
            raise ValueError("a qubit is measured twice in the plan")
        if set(planned) & set(self.outputs):
            raise ValueError("output qubits cannot be in the measurement plan")
        missing = set(range(self.graph.n)) - set(planned) - set(self.outputs)
        if missing:
            raise ValueError(f"qubits {sorted(missing)} have no planned measurement")
        if not self.output_bases:
            object.__setattr__(self, "output_bases", ("z",) * len(self.outputs))
        if not self.corrections:
            object.__setattr__(self, "corrections", (OutputCorrection(),) * len(self.outputs))
        if len(self.output_bases) != len(self.outputs) or len(self.corrections) != len(self.outputs):
            raise ValueError("output bases/corrections must match outputs")

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "chains": [list(c) for c in self.chains],
            "plan": [m.to_json() for m in self.plan],
            "outputs": list(self.outputs),
            "output_bases": list(self.output_bases),
            "corrections": [c.to_json() for c in self.corrections],
            "frontiers": [
                [{"qubit": f.qubit, "x": sorted(f.x_domain), "z": sorted(f.z_domain)} for f in row]
                for row in self.frontiers
            ],
            "edge_gates": [list(e) for e in self.edge_gates],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> MeasurementPattern:
        try:
            return cls(
                graph=Graph.from_json(data["graph"]),
                chains=tuple(tuple(int(x) for x in c) for c in data["chains"]),
                plan=tuple(PlannedMeasurement.from_json(m) for m in data["plan"]),
                outputs=tuple(int(x) for x in data["outputs"]),
                output_bases=tuple(data.get("output_bases", ())),
                corrections=tuple(OutputCorrection.from_json(c) for c in data.get("corrections", ())),
                frontiers=tuple(
                    tuple(FrontierEntry(int(f["qubit"]), frozenset(f["x"]), frozenset(f["z"])) for f in row)
                    for row in data.get("frontiers", ())
                ),
                edge_gates=tuple(tuple(int(x) for x in e) for e in data.get("edge_gates", ())),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed pattern JSON: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


class _Compiler:
    def __init__(self, qubits: int):
        self.n = qubits
        self.edges: list[tuple[int, int]] = []
        self.edge_gates: list[tuple[int, int, int]] = []
        self.chains = [[q] for q in range(qubits)]
        self.xdom = [frozenset() for _ in range(qubits)]
        self.zdom = [frozenset() for _ in range(qubits)]
        self.head_has_cz = [False] * qubits
        self.plan: list[PlannedMeasurement] = []

    def head(self, q: int) -> int:
        return self.chains[q][-1]

    def teleport(self, q: int, alpha: float) -> None:
        a = self.head(q)
        b = self.n
        self.n += 1
        self.edges.append((a, b))
        self.plan.append(PlannedMeasurement(a, "xy", -alpha if alpha else 0.0, self.xdom[q]))
        self.xdom[q], self.zdom[q] = self.zdom[q] ^ {a}, self.xdom[q]
        self.chains[q].append(b)
        self.head_has_cz[q] = False

    def cz(self, q1: int, q2: int, gate_index: int) -> None:
        for q in (q1, q2):
            if self.head_has_cz[q]:
                self.teleport(q, 0.0)
                self.teleport(q, 0.0)
        a, b = self.head(q1), self.head(q2)
        self.edges.append((a, b))
        self.edge_gates.append((min(a, b), max(a, b), gate_index))
        self.zdom[q1], self.zdom[q2] = self.zdom[q1] ^ self.xdom[q2], self.zdom[q2] ^ self.xdom[q1]
        self.head_has_cz[q1] = self.head_has_cz[q2] = True

    def frontier(self) -> tuple[FrontierEntry, ...]:
        return tuple(FrontierEntry(self.head(q), self.xdom[q], self.zdom[q]) for q in range(len(self.chains)))


def compile_to_pattern(c: CircuitIR) -> MeasurementPattern:
    """Chain-per-qubit graph-state pattern reproducing ``c``'s output statistics.

    Single-qubit gates add at most three chain qubits; each CZ adds one
    inter-chain edge, first advancing a chain by an identity teleport (two
    qubits) if its head already carries a CZ edge.
    """
    comp = _Compiler(c.qubits)
    frontiers = [comp.frontier()]
    for i, g in enumerate(c.gates):
        if isinstance(g, CZGate):
            comp.cz(g.control, g.target, i)
        else:
            for alpha in j_angles(g.matrix):
                comp.teleport(g.target, alpha)
        frontiers.append(comp.frontier())
    outputs = tuple(comp.head(q) for q in range(c.qubits))
    corrections = tuple(OutputCorrection(comp.xdom[q], comp.zdom[q]) for q in range(c.qubits))
    return MeasurementPattern(
        graph=Graph.from_edges(comp.n, comp.edges),
        chains=tuple(tuple(ch) for ch in comp.chains),
        plan=tuple(comp.plan),
        outputs=outputs,
        output_bases=c.measure,
        corrections=corrections,
        frontiers=tuple(frontiers),
        edge_gates=tuple(comp.edge_gates),
    )


def insert_output_qubits(p: MeasurementPattern, prefix: int) -> MeasurementPattern:
    """Add one link qubit per chain right after the sub-pattern of the first ``prefix`` gates.

    The new qubits are the outputs.  Qubits of the prefix keep their planned
    measurements, every later qubit is measured in z, and the outputs then hold
    the circuit's intermediate state up to the recorded local corrections.
    """
    if not p.frontiers:
        raise ValueError("pattern carries no gate bookkeeping (not produced by compile_to_pattern)")
    if not 0 <= prefix < len(p.frontiers):
        raise ValueError(f"prefix {prefix} is not a gate prefix (0..{len(p.frontiers) - 1})")
    frontier = p.frontiers[prefix]
    prefix_edge_heads = {q for u, v, gi in p.edge_gates if gi < prefix for q in (u, v)}
    planned = {m.qubit: m for m in p.plan}
    edges = set(p.graph.edges())
    n = p.graph.n
    kept: set[int] = set()
    extra_plan: list[PlannedMeasurement] = []
    outputs, corrections, chains = [], [], []
    for chain, f in zip(p.chains, frontier):
        h = f.qubit
        pos = chain.index(h)
        o = n
        n += 1
        outputs.append(o)
        if h in prefix_edge_heads:
            # the head is part of the prefix: teleport it through J(0) = H into o
            kept.update(chain[: pos + 1])
            extra_plan.append(PlannedMeasurement(h, "xy", 0.0, f.x_domain))
            z_dom = f.x_domain
            if pos + 1 < len(chain):
                nxt = chain[pos + 1]
                edges.discard((min(h, nxt), max(h, nxt)))
                edges.add((o, nxt))
                z_dom = z_dom ^ {nxt}
            edges.add((h, o))
            corrections.append(OutputCorrection(f.z_domain ^ {h}, z_dom, "H"))
            chains.append(chain[: pos + 1] + (o,) + chain[pos + 1 :])
        else:
            kept.update(chain[:pos])
            if pos > 0:
                prev = chain[pos - 1]
                edges.discard((min(prev, h), max(prev, h)))
                edges.add((prev, o))
            edges.add((o, h))
            corrections.append(OutputCorrection(f.x_domain, f.z_domain ^ {h}, "I"))
            chains.append(chain[:pos] + (o,) + chain[pos:])
    plan = [m for m in p.plan if m.qubit in kept and m.qubit not in {e.qubit for e in extra_plan}]
    plan += extra_plan
    plan += [PlannedMeasurement(v, "z") for v in range(p.graph.n) if v not in kept]
    return MeasurementPattern(
        graph=Graph.from_edges(n, edges),
        chains=tuple(chains),
        plan=tuple(plan),
        outputs=tuple(outputs),
        output_bases=("z",) * len(outputs),
        corrections=tuple(corrections),
    )


# exact pattern evaluation


@dataclass
class _Branch:
    prob: float
    state: StateVector
    live: list[int]
    outcomes: dict[int, int] = field(default_factory=dict)


def _parity(domain, outcomes: Mapping[int, int]) -> int:
    return sum(outcomes.get(q, 0) for q in domain) & 1


def _ensure_live(br: _Branch, g: Graph, qubits, measured) -> None:
    for v in qubits:
        if v in br.live or v in measured:
            continue
        s = dense.append_plus(br.state)
        for u in g.neighbors(v):
            if u in br.live:
                s = dense.apply_cz(s, br.live.index(u), s.n - 1)
        br.state = s
        br.live.append(v)


def pattern_branches(
    p: MeasurementPattern,
    forced: Mapping[int, int] | None = None,
    live_cap: int = dense.DEFAULT_DENSE_CAP,
) -> list[_Branch]:
    """Every measurement branch of ``p`` with its exact probability.

    Qubits are prepared lazily (only once a neighbour is about to be measured),
    so the live register stays small.  Branches agreeing on every domain parity
    that still matters and on their state (up to phase) are merged.
    ``forced`` pins outcomes of selected qubits.
    """
    forced = dict(forced or {})
    g = p.graph
    final = [d for c in p.corrections for d in (c.x_domain, c.z_domain)]
    empty = StateVector(0, np.array([1.0 + 0j]))
    branches = [_Branch(1.0, empty, [])]
    measured: set[int] = set()
    for i, m in enumerate(p.plan):
        next_branches: list[_Branch] = []
        for br in branches:
            _ensure_live(br, g, [m.qubit] + g.neighbors(m.qubit), measured)
            if len(br.live) > live_cap:
                raise dense.CapExceededError(f"live register of {len(br.live)} qubits exceeds {live_cap}")
            pos = br.live.index(m.qubit)
            if m.basis == "z":
                vecs = basis_vectors("z")
            else:
                sign = -1 if _parity(m.s_domain, br.outcomes) else 1
                vecs = basis_vectors(sign * m.angle)
            for s, vec in enumerate(vecs):
                if forced.get(m.qubit, s) != s:
                    continue
                post = dense.project_out(br.state, pos, vec)
                weight = post.norm() ** 2
                if weight < 1e-14:
                    continue
                live = br.live[:pos] + br.live[pos + 1 :]
                state = StateVector(post.n, post.amplitudes / math.sqrt(weight))
                next_branches.append(_Branch(br.prob * weight, state, live, {**br.outcomes, m.qubit: s}))
        measured.add(m.qubit)
        branches = _merge(next_branches, [f.s_domain for f in p.plan[i + 1 :]] + final)
    for br in branches:
        _ensure_live(br, g, p.outputs, measured)
    return branches


def _merge(branches: list[_Branch], domains) -> list[_Branch]:
    merged: dict[tuple, list[_Branch]] = {}
    for br in branches:
        key = (tuple(br.live), tuple(_parity(d, br.outcomes) for d in domains))
        bucket = merged.setdefault(key, [])
        for other in bucket:
            if dense.equal_up_to_phase(other.state, br.state, atol=1e-10):
                other.prob += br.prob
                break
        else:
            bucket.append(br)
    return [br for bucket in merged.values() for br in bucket]


def _output_tensor(br: _Branch, outputs: Sequence[int]) -> np.ndarray:
    t = br.state.tensor()
    return t.transpose([br.live.index(o) for o in outputs])


def pattern_distribution(p: MeasurementPattern, live_cap: int = dense.DEFAULT_DENSE_CAP) -> dict[tuple[int, ...], float]:
    """Exact distribution of the byproduct-corrected output readouts."""
    dist: dict[tuple[int, ...], float] = {}
    for br in pattern_branches(p, live_cap=live_cap):
        state = StateVector.from_tensor(_output_tensor(br, p.outputs))
        flips = []
        for basis, corr in zip(p.output_bases, p.corrections):
            px = _parity(corr.x_domain, br.outcomes)
            pz = _parity(corr.z_domain, br.outcomes)
            flips.append({"z": px, "x": pz, "y": px ^ pz}[basis])
        for raw, prob in _distribution(state, p.output_bases).items():
            key = tuple(r ^ f for r, f in zip(raw, flips))
            dist[key] = dist.get(key, 0.0) + br.prob * prob
    return dist


def pattern_output_states(
    p: MeasurementPattern, live_cap: int = dense.DEFAULT_DENSE_CAP
) -> list[tuple[float, StateVector]]:
    """(probability, corrected output state) for every merged branch."""
    out = []
    for br in pattern_branches(p, live_cap=live_cap):
        t = _output_tensor(br, p.outputs)
        for q, corr in enumerate(p.corrections):
            fix = np.eye(2, dtype=complex)
            if _parity(corr.x_domain, br.outcomes):
                fix = dense.X @ fix
            if _parity(corr.z_domain, br.outcomes):
                fix = dense.Z @ fix
            if corr.clifford == "H":
                fix = H @ fix
            t = np.moveaxis(np.tensordot(fix, t, axes=([1], [q])), 0, q)
        out.append((br.prob, StateVector.from_tensor(t)))
    return out


def _outcome_elements(p: MeasurementPattern, outcomes: Mapping[int, int]) -> list[np.ndarray]:
    elements: list = [None] * p.graph.n
    for m in p.plan:
        if m.basis == "z":
            vec = basis_vectors("z")[outcomes[m.qubit]]
        else:
            sign = -1 if _parity(m.s_domain, outcomes) else 1
            vec = basis_vectors(sign * m.angle)[outcomes[m.qubit]]
        elements[m.qubit] = dense.projector(vec)
    for o, b in zip(p.outputs, p.output_bases):
        elements[o] = dense.projector(basis_vectors(b)[outcomes[o]])
    return elements


def pattern_distribution_network(
    p: MeasurementPattern,
    sequence=None,
    max_branches: int = 1 << 12,
) -> dict[tuple[int, ...], float]:
    """Same distribution as :func:`pattern_distribution`, one network contraction per outcome string.

    Adaptive angles are fixed by the outcome string itself, so every branch is
    a plain product-effect probability.  ``sequence`` defaults to a
    carving-width-optimal order when the graph is connected and small enough.
    """
    from .tensors import execute_sequence, sequence_from_tree
    from .widths import carving_width, tree_layout_at

    measured = [m.qubit for m in p.plan] + list(p.outputs)
    if 1 << len(measured) > max_branches:
        raise dense.CapExceededError(f"{1 << len(measured)} outcome strings exceed the cap {max_branches}")
    if sequence is None:
        g = p.graph
        if g.n < 2:
            tree = None
        elif g.is_connected() and g.n <= DEFAULT_EXACT_CAP:
            tree = carving_width(g)[1]
        else:
            tree = tree_layout_at(g.n, 0)
        sequence = sequence_from_tree(tree) if tree is not None else None
    dist: dict[tuple[int, ...], float] = {}
    for bits in itertools.product((0, 1), repeat=len(measured)):
        outcomes = dict(zip(measured, bits))
        net = probability_network(p.graph, _outcome_elements(p, outcomes))
        if sequence is None:
            prob = float(np.real(net.tensors[0].data))
        else:
            prob = float(np.real(execute_sequence(net, sequence)[0].data))
        key = []
        for o, basis, corr in zip(p.outputs, p.output_bases, p.corrections):
            px = _parity(corr.x_domain, outcomes)
            pz = _parity(corr.z_domain, outcomes)
            key.append(outcomes[o] ^ {"z": px, "x": pz, "y": px ^ pz}[basis])
        dist[tuple(key)] = dist.get(tuple(key), 0.0) + prob
    return dist


# graph-state tensor networks


def _edge_label(u: int, v: int) -> tuple:
    return ("e", min(u, v), max(u, v))


def _peps_array(g: Graph, v: int) -> tuple[tuple, np.ndarray]:
    """Physical index first, then one 2-dim bond per incident edge (ascending neighbour).

    Each CZ factor (-1)^(i_u i_v) is split as sum_a delta(i_u, a) (-1)^(a i_v)
    with the delta on the lower-indexed endpoint.
    """
    nbrs = g.neighbors(v)
    labels = (("p", v),) + tuple(_edge_label(v, u) for u in nbrs)
    data = np.zeros((2,) * (1 + len(nbrs)), dtype=complex)
    for idx in itertools.product((0, 1), repeat=1 + len(nbrs)):
        i, bonds = idx[0], idx[1:]
        value = 1 / math.sqrt(2)
        for u, a in zip(nbrs, bonds):
            value *= (a == i) if v < u else (-1) ** (a * i)
        data[idx] = value
    return labels, data


def peps_tensors(g: Graph) -> TensorNetwork:
    """One tensor per qubit; contracting all bonds yields graph_state(g)."""
    return TensorNetwork(tuple(Tensor(*_peps_array(g, v)) for v in range(g.n)))


def _as_matrix(e) -> np.ndarray:
    if e is None:
        return np.eye(2, dtype=complex)
    if isinstance(e, PovmElement):
        return e.matrix
    return np.asarray(e, dtype=complex)


def probability_network(g: Graph, elements: Sequence) -> TensorNetwork:
    """Network of B tensors on the same graph; ket and bra bonds fuse into one 4-valued label.

    ``elements[q]`` is a :class:`PovmElement`, a 2x2 matrix, or ``None`` for an
    unmeasured qubit.  The full contraction is tr(E rho).
    """
    if len(elements) != g.n:
        raise ValueError(f"need one element per qubit ({g.n}), got {len(elements)}")
    tensors = []
    for v in range(g.n):
        labels, a = _peps_array(g, v)
        e = _as_matrix(elements[v])
        d = a.ndim - 1
        # B[bonds, bonds'] = sum_{i,i'} A[i, bonds] conj(A[i', bonds']) <i'|E|i>
        b = np.tensordot(np.tensordot(e, a, axes=([1], [0])), a.conj(), axes=([0], [0]))
        order = [k for pair in zip(range(d), range(d, 2 * d)) for k in pair]
        b = b.transpose(order).reshape((4,) * d)
        tensors.append(Tensor(labels[1:], b))
    return TensorNetwork(tuple(tensors))


def suppress_degree2(g: Graph) -> Graph:
    """Splice out degree-2 vertices while that creates no parallel edge.

    Vertices are taken lowest index first; survivors keep their relative order.
    A three-vertex path is left alone: splicing its middle would give a single
    edge and drop the carving width from 2 to 1.
    """
    while True:
        for v in range(g.n):
            if g.degree(v) != 2:
                continue
            a, b = g.neighbors(v)
            if g.has_edge(a, b) or (g.degree(a) == 1 and g.degree(b) == 1):
                continue
            smaller, relabel = delete_vertex(g, v)
            g = smaller.toggle_edge(relabel[a], relabel[b])
            break
        else:
            return g
