"""Checks of the width inequalities on enumerable instances, and the report stream.

Widths are in log units throughout: a tree edge's entanglement is its cut-rank
(log2 of the Schmidt rank), its contraction cost the number of crossing edges.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

from . import dense
from .exceptions import CapExceededError, ExtractionStallError
from .graphs import (
    Bipartition,
    Graph,
    all_graphs,
    complete_graph,
    crossing_mask,
    cut_rank_mask,
    cycle_graph,
    local_complement,
    path_graph,
    random_bounded_degree_graph,
    star_graph,
)
from .mqc import build_circuit_graph, circuit_carving_width, compile_to_pattern, sample_circuits, suppress_degree2
from .widths import (
    DEFAULT_EXACT_CAP,
    DEFAULT_TREE_CAP,
    DEFAULT_TWD_CAP,
    TreeLayout,
    branch_width,
    count_tree_layouts,
    tree_layout_at,
    treewidth,
)

__all__ = [
    "BoundViolation",
    "TreeRecord",
    "PairRecord",
    "TraceStep",
    "BoundsReport",
    "SuiteConfig",
    "verify_tree_inequality",
    "verify_width_sandwich",
    "verify_twd_rwd",
    "extract_pairs",
    "pair_sets",
    "pair_record",
    "run_suite",
    "reports_to_jsonl",
    "reports_to_csv",
    "CSV_COLUMNS",
]

SVD_CHECK_MAX = 10

CutRankFn = Callable[[Graph, int], int]


class BoundViolation(AssertionError):
    """An inequality failed; the message carries the witness."""


def _side(mask: int) -> list[int]:
    return [v for v in range(mask.bit_length()) if (mask >> v) & 1]


# per-tree inequalities


@dataclass(frozen=True)
class TreeRecord:
    """Both sides of the per-tree inequalities for one layout.

    ``max_log_chi_svd`` is the same maximum from dense Schmidt ranks (``None``
    when the state is too large to build).
    """

    tree_id: str
    delta: int
    max_crossing: int
    max_log_chi: int
    max_log_chi_svd: int | None = None
    witness_edge: tuple[int, int] | None = None

    @property
    def max_ok(self) -> bool:
        return self.max_crossing >= self.max_log_chi

    @property
    def min_ok(self) -> bool:
        return self.max_crossing <= self.delta**2 * self.max_log_chi

    @property
    def bridge_ok(self) -> bool | None:
        if self.max_log_chi_svd is None:
            return None
        return self.max_log_chi_svd == self.max_log_chi

    def to_json(self) -> dict:
        return {
            "tree": self.tree_id,
            "max_L": self.max_crossing,
            "max_log_chi": self.max_log_chi,
            "max_log_chi_svd": self.max_log_chi_svd,
            "witness_edge": list(self.witness_edge) if self.witness_edge else None,
        }


def _log2_rank(s: dense.StateVector, mask: int) -> int:
    r = dense.schmidt_rank(s, Bipartition.from_mask(s.n, mask))
    return r.bit_length() - 1


def verify_tree_inequality(
    g: Graph,
    t: TreeLayout,
    tree_id: str = "",
    check_svd: bool | None = None,
    strict: bool = True,
    rank_fn: CutRankFn = cut_rank_mask,
) -> TreeRecord:
    """max_e L_e >= max_e log2 chi_e over the edges of ``t`` (and the Delta^2 upper bound).

    chi_e is taken as 2^cut_rank and, for ``n <= 10``, recomputed by SVD of the
    dense graph state.  With ``strict`` a failure raises :class:`BoundViolation`
    naming the tree edge with the largest gap.
    """
    if t.leaves != g.n:
        raise ValueError(f"tree has {t.leaves} leaves, graph has {g.n} vertices")
    if check_svd is None:
        check_svd = g.n <= SVD_CHECK_MAX
    masks = t.edge_masks()
    crossing = {e: crossing_mask(g, m) for e, m in masks.items()}
    ranks = {e: rank_fn(g, m) for e, m in masks.items()}
    svd_max = None
    if check_svd:
        s = dense.graph_state(g, cap=max(g.n, SVD_CHECK_MAX))
        svd_max = max(_log2_rank(s, m) for m in masks.values())
    witness = max(masks, key=lambda e: (ranks[e] - crossing[e], e))
    rec = TreeRecord(
        tree_id=tree_id,
        delta=g.max_degree,
        max_crossing=max(crossing.values()),
        max_log_chi=max(ranks.values()),
        max_log_chi_svd=svd_max,
        witness_edge=witness,
    )
    if strict and not (rec.max_ok and rec.min_ok and rec.bridge_ok is not False):
        raise BoundViolation(f"tree {tree_id or t.to_json()} fails at edge {witness}: {rec.to_json()}")
    return rec


# whole-graph inequalities


@dataclass(frozen=True)
class SandwichRecord:
    delta: int
    cc: int
    rwd: int
    cc_tree: TreeLayout
    rwd_tree: TreeLayout

    @property
    def chiwd_ok(self) -> bool:
        return self.rwd <= self.cc

    @property
    def min2_ok(self) -> bool:
        return self.rwd <= self.cc <= self.delta**2 * self.rwd


def verify_width_sandwich(
    g: Graph,
    strict: bool = True,
    tree_cap: int = DEFAULT_TREE_CAP,
    exact_cap: int = DEFAULT_EXACT_CAP,
    rank_fn: CutRankFn = cut_rank_mask,
) -> SandwichRecord:
    """rwd <= cc <= Delta^2 rwd with both widths exact (g connected, n >= 2)."""
    if not g.is_connected():
        raise ValueError("the width sandwich is checked on connected graphs")
    cc, cc_tree = branch_width(g.n, lambda m: crossing_mask(g, m), None, tree_cap, exact_cap)
    rwd, rwd_tree = branch_width(g.n, lambda m: rank_fn(g, m), None, tree_cap, exact_cap)
    rec = SandwichRecord(g.max_degree, cc, rwd, cc_tree, rwd_tree)
    if strict and not rec.min2_ok:
        raise BoundViolation(
            f"sandwich fails on {g.dumps()}: rwd={rwd} cc={cc} delta={rec.delta}; "
            f"cc tree {cc_tree.dumps()}, rwd tree {rwd_tree.dumps()}"
        )
    return rec


def _twd_rwd_ok(twd: int, rwd: int, delta: int) -> bool:
    return (twd - 1) <= 2 * delta**2 * rwd and rwd <= delta * (twd + 1) - 1


@dataclass(frozen=True)
class TwdRecord:
    delta: int
    twd: int
    rwd: int

    @property
    def ok(self) -> bool:
        return _twd_rwd_ok(self.twd, self.rwd, self.delta)


def verify_twd_rwd(
    g: Graph,
    strict: bool = True,
    tree_cap: int = DEFAULT_TREE_CAP,
    exact_cap: int = DEFAULT_EXACT_CAP,
    twd_cap: int = DEFAULT_TWD_CAP,
    rank_fn: CutRankFn = cut_rank_mask,
) -> TwdRecord:
    """(twd - 1) / (2 Delta^2) <= rwd <= Delta (twd + 1) - 1 with exact widths."""
    if not g.is_connected():
        raise ValueError("the twd-rwd bounds are checked on connected graphs")
    rwd, _ = branch_width(g.n, lambda m: rank_fn(g, m), None, tree_cap, exact_cap)
    rec = TwdRecord(g.max_degree, treewidth(g, twd_cap), rwd)
    if strict and not rec.ok:
        raise BoundViolation(f"twd-rwd bounds fail on {g.dumps()}: twd={rec.twd} rwd={rwd} delta={rec.delta}")
    return rec


# pair extraction


@dataclass(frozen=True)
class TraceStep:
    """One operation of the extraction with the graph and cut-rank after it."""

    op: str
    detail: tuple
    graph: Graph
    cut_rank: int

    def to_json(self) -> dict:
        return {
            "op": self.op,
            "detail": [list(x) if isinstance(x, (tuple, list)) else x for x in self.detail],
            "edges": [list(e) for e in self.graph.edges()],
            "cut_rank": self.cut_rank,
        }


def _unlink_sides(g: Graph, mask_a: int) -> Graph:
    """Drop every edge with both ends on the same side."""
    mask_b = g.full_mask & ~mask_a
    rows = tuple(r & (mask_b if (mask_a >> v) & 1 else mask_a) for v, r in enumerate(g.rows))
    return Graph(g.n, rows)


def pair_sets(g: Graph, p: Bipartition) -> list[tuple[int, tuple[int, ...]]]:
    """The sets F_k as (seed in B, members in A).

    Seeds are the boundary vertices of B in increasing order; a seed whose A
    neighbours are all taken already opens no set.
    """
    mask_a = p.mask_a
    taken = 0
    out = []
    for b in sorted(p.side_b):
        new = g.rows[b] & mask_a & ~taken
        if new:
            out.append((b, tuple(_side(new))))
            taken |= new
    return out


def _lc_search(g: Graph, mask_a: int, a: int, b: int, candidates: Sequence[int], max_len: int):
    """Shortest LC sequence on ``candidates`` that, after unlinking, isolates the pair (a, b)."""
    target_a, target_b = 1 << b, 1 << a
    for length in range(max_len + 1):
        for seq in itertools.product(candidates, repeat=length):
            h = g
            for v in seq:
                h = local_complement(h, v)
            h = _unlink_sides(h, mask_a)
            if h.rows[a] == target_a and h.rows[b] == target_b:
                return seq, h
    return None, None


def extract_pairs(g: Graph, p: Bipartition, max_lc: int = 3) -> tuple[int, list[TraceStep]]:
    """Distil one Bell pair per set F_k with operations local to A or to B.

    Steps: undo edges inside A and inside B; for each F_k in turn z-measure all
    but its lowest A member, then search LC sequences (length <= ``max_lc``, on
    the survivor and the live vertices of B) that leave the survivor and the seed
    as an isolated pair.  Returns the pair count and the trace; raises
    :class:`ExtractionStallError` if a set yields no pair or a step raises the
    cut-rank.
    """
    if p.n != g.n:
        raise ValueError("bipartition does not match the graph")
    mask_a = p.mask_a
    sets = pair_sets(g, p)

    trace: list[TraceStep] = []

    def record(op, detail, h):
        r = cut_rank_mask(h, mask_a)
        if trace and r > trace[-1].cut_rank:
            raise ExtractionStallError(f"step {op} {detail} raised the cut-rank to {r}")
        trace.append(TraceStep(op, tuple(detail), h, r))

    record("start", (), g)
    record("sets", tuple((b, list(members)) for b, members in sets), g)
    h = _unlink_sides(g, mask_a)
    record("unlink", (), h)
    done = 0
    for b, members in sets:
        a, rest = members[0], members[1:]
        for v in rest:
            h = h.isolate(v)
        if rest:
            record("measure-z", rest, h)
        candidates = [a] + [v for v in sorted(p.side_b) if h.rows[v] and not (done >> v) & 1]
        seq, after = _lc_search(h, mask_a, a, b, candidates, max_lc)
        if seq is None:
            raise ExtractionStallError(f"no LC sequence of length <= {max_lc} isolates pair ({a}, {b})")
        h = after
        record("lc", seq, h)
        done |= (1 << a) | (1 << b)
    if trace[-1].cut_rank != len(sets):
        raise ExtractionStallError(f"{len(sets)} pairs left but final cut-rank is {trace[-1].cut_rank}")
    return len(sets), trace


@dataclass(frozen=True)
class PairRecord:
    side_a: tuple[int, ...]
    delta: int
    cut_rank: int
    boundary_a: int
    pairs: int
    max_set_a: int
    stalled: str | None = None

    @property
    def ok(self) -> bool:
        return (
            self.stalled is None
            and self.pairs <= self.cut_rank
            and self.boundary_a <= self.delta * self.pairs
            and self.max_set_a <= self.delta
        )

    def to_json(self) -> dict:
        return {
            "A": list(self.side_a),
            "cut_rank": self.cut_rank,
            "boundary_A": self.boundary_a,
            "pairs": self.pairs,
            "max_F_A": self.max_set_a,
            "stalled": self.stalled,
        }


def pair_record(g: Graph, p: Bipartition, max_lc: int = 3) -> PairRecord:
    mask_b = p.mask_b
    boundary = sum(1 for a in p.side_a if g.rows[a] & mask_b)
    sets = pair_sets(g, p)
    try:
        pairs, _ = extract_pairs(g, p, max_lc)
        stalled = None
    except ExtractionStallError as exc:
        pairs, stalled = 0, str(exc)
    return PairRecord(
        side_a=tuple(sorted(p.side_a)),
        delta=g.max_degree,
        cut_rank=cut_rank_mask(g, p.mask_a),
        boundary_a=boundary,
        pairs=pairs,
        max_set_a=max((len(m) for _, m in sets), default=0),
        stalled=stalled,
    )


# report stream


@dataclass
class BoundsReport:
    """Raw measurements for one graph; verdicts are derived, never stored."""

    graph_id: str
    family: str
    graph: Graph
    delta: int
    cc: int | None = None
    rwd: int | None = None
    twd: int | None = None
    cc_suppressed: int | None = None
    cc_circuit_graph: int | None = None
    trees: list[TreeRecord] = field(default_factory=list)
    pairs: list[PairRecord] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.graph.n

    def verdicts(self) -> dict[str, bool | None]:
        have = self.cc is not None and self.rwd is not None
        out: dict[str, bool | None] = {
            "max": all(t.max_ok for t in self.trees) if self.trees else None,
            "min": all(t.min_ok for t in self.trees) if self.trees else None,
            "bridge": None,
            "chiwd": self.rwd <= self.cc if have else None,
            "min2": self.rwd <= self.cc <= self.delta**2 * self.rwd if have else None,
            "twd_rwd": _twd_rwd_ok(self.twd, self.rwd, self.delta)
            if self.twd is not None and self.rwd is not None
            else None,
            "pairs": all(p.ok for p in self.pairs) if self.pairs else None,
            "suppress": self.cc_suppressed == self.cc if self.cc_suppressed is not None and self.cc is not None else None,
            "circuit": self.cc <= self.cc_circuit_graph
            if self.cc_circuit_graph is not None and self.cc is not None
            else None,
        }
        bridge = [t.bridge_ok for t in self.trees if t.bridge_ok is not None]
        if bridge:
            out["bridge"] = all(bridge)
        return out

    @property
    def passed(self) -> bool:
        return all(v is not False for v in self.verdicts().values())

    def to_json(self, include_timings: bool = False) -> dict:
        out = {
            "graph_id": self.graph_id,
            "family": self.family,
            "n": self.n,
            "delta": self.delta,
            "graph": self.graph.to_json(),
            "cc": self.cc,
            "rwd": self.rwd,
            "twd": self.twd,
            "cc_suppressed": self.cc_suppressed,
            "cc_circuit_graph": self.cc_circuit_graph,
            "trees": [t.to_json() for t in self.trees],
            "pairs": [p.to_json() for p in self.pairs],
            "skipped": list(self.skipped),
            "verdicts": self.verdicts(),
            "passed": self.passed,
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return out


FAMILIES = ("complete", "path", "cycle", "star", "connected", "random", "circuit")


@dataclass(frozen=True)
class SuiteConfig:
    families: tuple[str, ...] = FAMILIES
    n_min: int = 2
    n_max: int = 6
    seed: int = 0
    random_count: int = 10
    max_degree: int = 3
    circuit_count: int = 5
    circuit_qubits: int = 3
    circuit_gates: int = 5
    trees_per_graph: int = 3
    bipartitions_per_graph: int = 3
    tree_cap: int = DEFAULT_TREE_CAP
    exact_cap: int = DEFAULT_EXACT_CAP
    twd_cap: int = DEFAULT_TWD_CAP
    dense_cap: int = SVD_CHECK_MAX
    fault: str | None = None

    _KEYS = {
        "families": "families",
        "nMin": "n_min",
        "nMax": "n_max",
        "seed": "seed",
        "randomCount": "random_count",
        "maxDegree": "max_degree",
        "circuitCount": "circuit_count",
        "circuitQubits": "circuit_qubits",
        "circuitGates": "circuit_gates",
        "treesPerGraph": "trees_per_graph",
        "bipartitionsPerGraph": "bipartitions_per_graph",
        "treeCap": "tree_cap",
        "exactCap": "exact_cap",
        "twdCap": "twd_cap",
        "denseCap": "dense_cap",
        "fault": "fault",
    }

    def __post_init__(self):
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown graph families {sorted(unknown)}")
        for name in ("tree_cap", "exact_cap", "twd_cap", "dense_cap"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be at least 2")
        if self.n_min < 2 or self.n_max < self.n_min:
            raise ValueError(f"bad size range {self.n_min}..{self.n_max}")
        if self.fault not in (None, "corrupt-cut-rank"):
            raise ValueError(f"unknown fault hook {self.fault!r}")

    @classmethod
    def from_mapping(cls, data: Mapping) -> SuiteConfig:
        unknown = set(data) - set(cls._KEYS)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        kwargs = {cls._KEYS[k]: v for k, v in data.items()}
        if "families" in kwargs:
            kwargs["families"] = tuple(kwargs["families"])
        return cls(**kwargs)


def _rank_fn(config: SuiteConfig) -> CutRankFn:
    if config.fault == "corrupt-cut-rank":
        # test hook: inflate every cut-rank so the chiwd verdict must fail
        return lambda g, m: cut_rank_mask(g, m) + g.n
    return cut_rank_mask


def _family_graphs(config: SuiteConfig, family: str) -> Iterator[tuple[str, Graph, int | None]]:
    sizes = range(config.n_min, config.n_max + 1)
    rng = random.Random(f"{config.seed}:{family}")
    if family == "complete":
        for n in sizes:
            yield f"complete-{n}", complete_graph(n), None
    elif family == "path":
        for n in sizes:
            yield f"path-{n}", path_graph(n), None
    elif family == "cycle":
        for n in sizes:
            if n >= 3:
                yield f"cycle-{n}", cycle_graph(n), None
    elif family == "star":
        for n in sizes:
            if n >= 3:
                yield f"star-{n - 1}", star_graph(n - 1), None
    elif family == "connected":
        if config.n_min <= 7:
            for gid, g in all_graphs(config.n_min, min(config.n_max, 7), connected_only=True):
                yield gid, g, None
    elif family == "random":
        for i in range(config.random_count):
            n = rng.randint(config.n_min, config.n_max)
            yield f"random-{i}", random_bounded_degree_graph(n, config.max_degree, rng), None
    elif family == "circuit":
        circuits = sample_circuits(
            rng.randrange(1 << 30),
            config.circuit_count,
            config.circuit_qubits,
            config.circuit_gates,
            config.exact_cap,
        )
        for i, c in enumerate(circuits):
            cc_gc, _ = circuit_carving_width(build_circuit_graph(c), None, config.tree_cap, config.exact_cap)
            yield f"circuit-{i}", compile_to_pattern(c).graph, cc_gc


def _instance(config: SuiteConfig, family: str, gid: str, g: Graph, cc_gc: int | None) -> BoundsReport:
    rank_fn = _rank_fn(config)
    rep = BoundsReport(gid, family, g, g.max_degree, cc_circuit_graph=cc_gc)
    rng = random.Random(f"{config.seed}:{gid}")

    t0 = time.perf_counter()
    try:
        sw = verify_width_sandwich(g, False, config.tree_cap, config.exact_cap, rank_fn)
        rep.cc, rep.rwd = sw.cc, sw.rwd
        witnesses = [("cc-witness", sw.cc_tree), ("rwd-witness", sw.rwd_tree)]
    except CapExceededError as exc:
        rep.skipped.append(f"widths: {exc}")
        witnesses = []
    rep.timings["widths"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        rep.twd = treewidth(g, config.twd_cap)
    except CapExceededError as exc:
        rep.skipped.append(f"twd: {exc}")
    rep.timings["twd"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    total = count_tree_layouts(g.n)
    picks = [(f"layout-{i}", tree_layout_at(g.n, i)) for i in sorted(rng.sample(range(total), min(total, config.trees_per_graph)))]
    check_svd = g.n <= config.dense_cap
    for tid, t in witnesses + picks:
        rep.trees.append(verify_tree_inequality(g, t, tid, check_svd, strict=False, rank_fn=rank_fn))
    rep.timings["trees"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    for _ in range(config.bipartitions_per_graph):
        mask = rng.randrange(1, g.full_mask)
        rep.pairs.append(pair_record(g, Bipartition.from_mask(g.n, mask)))
    rep.timings["pairs"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    reduced = suppress_degree2(g)
    if reduced.n == g.n:
        rep.cc_suppressed = rep.cc
    else:
        try:
            rep.cc_suppressed, _ = branch_width(
                reduced.n, lambda m: crossing_mask(reduced, m), None, config.tree_cap, config.exact_cap
            )
        except CapExceededError as exc:
            rep.skipped.append(f"suppressed widths: {exc}")
    rep.timings["suppress"] = time.perf_counter() - t0
    return rep


def run_suite(config: SuiteConfig | Mapping | None = None) -> Iterator[BoundsReport]:
    """Deterministic stream of reports, ordered by family then instance."""
    if config is None:
        config = SuiteConfig()
    elif not isinstance(config, SuiteConfig):
        config = SuiteConfig.from_mapping(config)
    for family in config.families:
        for gid, g, cc_gc in _family_graphs(config, family):
            yield _instance(config, family, gid, g, cc_gc)


def reports_to_jsonl(reports, include_timings: bool = False) -> str:
    return "".join(json.dumps(r.to_json(include_timings), sort_keys=True) + "\n" for r in reports)


CSV_COLUMNS = (
    "graph_id",
    "family",
    "n",
    "delta",
    "cc",
    "rwd",
    "twd",
    "pass_max",
    "pass_min",
    "pass_bridge",
    "pass_chiwd",
    "pass_min2",
    "pass_twd_rwd",
    "pass_pairs",
    "pass_suppress",
    "pass_circuit",
    "passed",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        v = r.verdicts()
        raw = {"graph_id": r.graph_id, "family": r.family, "n": r.n, "delta": r.delta, "cc": r.cc, "rwd": r.rwd, "twd": r.twd}
        raw.update({f"pass_{k}": x for k, x in v.items()})
        raw["passed"] = r.passed
        w.writerow([_cell(raw[c]) for c in CSV_COLUMNS])
    return buf.getvalue()
