"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 unreadable or malformed input,
3 size cap exceeded, 4 inconsistent outcome specification.

CSV columns of ``verify --format csv``: graph_id, family, n, delta, cc, rwd, twd,
then one 0/1 flag per verdict (pass_max, pass_min, pass_bridge, pass_chiwd,
pass_min2, pass_twd_rwd, pass_pairs, pass_suppress, pass_circuit; empty when not
applicable) and the overall ``passed`` flag.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
from typing import Sequence

import numpy as np

from . import bounds, dense, mqc
from .exceptions import CapExceededError, ExtractionStallError
from .graphs import Bipartition, Graph, cut_rank_mask
from .tensors import execute_sequence, sequence_from_tree
from .ttn import ttn_bond_dims, ttn_from_dense
from .widths import (
    DEFAULT_EXACT_CAP,
    DEFAULT_TREE_CAP,
    DEFAULT_TWD_CAP,
    TreeLayout,
    carving_width,
    rank_width,
    tree_layout_at,
    treewidth,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_PARSE = 2
EXIT_CAP = 3
EXIT_OUTCOME = 4

_CHECK_TOL = 1e-9


class UsageError(Exception):
    """Bad input file or argument value (exit 2)."""


class OutcomeSpecError(Exception):
    """Outcome specification inconsistent with the input (exit 4)."""


class CheckFailed(Exception):
    """A --check cross-validation disagreed (exit 1)."""


# I/O helpers


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _parse(kind, data, path: str):
    try:
        return kind.from_json(data)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    """Write to ``out`` atomically (temp file + rename), or to stdout."""
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".mqcwidth-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load_graph(path: str) -> Graph:
    return _parse(Graph, _load_json(path), path)


# subcommands


def cmd_widths(args) -> int:
    g = _load_graph(args.graph)
    if g.n < 2 or not g.is_connected():
        raise UsageError("widths need a connected graph with at least 2 vertices")
    cc, cc_tree = carving_width(g, tree_cap=args.tree_cap, exact_cap=args.exact_cap)
    rwd, rwd_tree = rank_width(g, tree_cap=args.tree_cap, exact_cap=args.exact_cap)
    twd = treewidth(g, args.twd_cap)
    if args.format == "csv":
        text = _csv(["n", "delta", "cc", "rwd", "twd"], [[g.n, g.max_degree, cc, rwd, twd]])
    else:
        text = _dumps(
            {
                "n": g.n,
                "delta": g.max_degree,
                "cc": cc,
                "rwd": rwd,
                "twd": twd,
                "cc_tree": cc_tree.to_json(),
                "rwd_tree": rwd_tree.to_json(),
            }
        )
    _emit(text, args.out)
    return EXIT_OK


def _parse_bases(spec: str | None, n: int) -> list[str | None]:
    """Per-qubit basis string over x, y, z and '-' (unmeasured)."""
    if spec is None:
        return ["z"] * n
    if len(spec) != n:
        raise OutcomeSpecError(f"basis spec has {len(spec)} symbols for {n} qubits")
    out = []
    for ch in spec:
        if ch not in "xyz-":
            raise OutcomeSpecError(f"unknown basis symbol {ch!r}")
        out.append(None if ch == "-" else ch)
    return out


def _parse_outcomes(spec: str | None, measured: Sequence[int], n: int) -> dict[int, int]:
    """Fixed outcomes: one of 0, 1, '*' (free) or '-' (unmeasured) per qubit."""
    if spec is None:
        return {}
    if len(spec) != n:
        raise OutcomeSpecError(f"outcome spec has {len(spec)} symbols for {n} qubits")
    fixed = {}
    for q, ch in enumerate(spec):
        if ch in "01":
            if q not in measured:
                raise OutcomeSpecError(f"qubit {q} has a fixed outcome but is not measured")
            fixed[q] = int(ch)
        elif ch == "-":
            if q in measured:
                raise OutcomeSpecError(f"qubit {q} is measured but marked unmeasured")
        elif ch != "*":
            raise OutcomeSpecError(f"unknown outcome symbol {ch!r}")
    return fixed


def _graph_table(g: Graph, bases, fixed, args) -> dict[str, float]:
    measured = [q for q, b in enumerate(bases) if b is not None]
    free = [q for q in measured if q not in fixed]
    if len(free) > args.dense_cap:
        raise CapExceededError(f"{1 << len(free)} table rows exceed 2^{args.dense_cap}")
    if g.n >= 2 and g.is_connected() and g.n <= args.exact_cap:
        tree = carving_width(g, tree_cap=args.tree_cap, exact_cap=args.exact_cap)[1]
    else:
        tree = tree_layout_at(g.n, 0) if g.n >= 2 else None
    seq = sequence_from_tree(tree) if tree is not None else None
    state = dense.graph_state(g, args.dense_cap) if args.check else None
    table = {}
    for bits in itertools.product((0, 1), repeat=len(free)):
        outcome = {**fixed, **dict(zip(free, bits))}
        elements = [None] * g.n
        for q in measured:
            elements[q] = dense.projector(dense.basis_vectors(bases[q])[outcome[q]])
        net = mqc.probability_network(g, elements)
        if seq is None:
            prob = float(np.real(net.tensors[0].data))
        else:
            prob = float(np.real(execute_sequence(net, seq)[0].data))
        if state is not None:
            ref = dense.born_probability(state, elements)
            if abs(ref - prob) > _CHECK_TOL:
                raise CheckFailed(f"outcome {outcome}: network {prob!r} vs dense {ref!r}")
        table["".join(str(outcome[q]) for q in measured)] = prob
    return table


def _table_text(table: dict[str, float], qubits, fmt: str) -> str:
    if fmt == "csv":
        return _csv(["outcome", "probability"], [[k, repr(v)] for k, v in sorted(table.items())])
    return _dumps({"qubits": list(qubits), "table": {k: table[k] for k in sorted(table)}})


def _dist_to_table(dist) -> dict[str, float]:
    return {"".join(map(str, k)): v for k, v in dist.items()}


def cmd_simulate(args) -> int:
    data = _load_json(args.input)
    if isinstance(data, dict) and "qubits" in data and "gates" in data:
        circuit = _parse(mqc.CircuitIR, data, args.input)
        if args.bases is not None or args.outcomes is not None:
            raise OutcomeSpecError("circuits carry their own final measurements; drop --bases/--outcomes")
        pattern = mqc.compile_to_pattern(circuit)
        table = _dist_to_table(mqc.pattern_distribution(pattern, args.dense_cap))
        if args.check:
            ref = _dist_to_table(mqc.circuit_distribution(circuit))
            if mqc.total_variation(table, ref) > _CHECK_TOL:
                raise CheckFailed(f"pattern and circuit distributions differ: {table} vs {ref}")
        qubits = list(range(circuit.qubits))
    elif isinstance(data, dict) and "plan" in data:
        pattern = _parse(mqc.MeasurementPattern, data, args.input)
        if args.bases is not None or args.outcomes is not None:
            raise OutcomeSpecError("patterns carry their own measurement plan; drop --bases/--outcomes")
        table = _dist_to_table(mqc.pattern_distribution(pattern, args.dense_cap))
        if args.check:
            ref = _dist_to_table(mqc.pattern_distribution_network(pattern, max_branches=1 << args.dense_cap))
            if mqc.total_variation(table, ref) > _CHECK_TOL:
                raise CheckFailed(f"branch enumeration and network contraction differ: {table} vs {ref}")
        qubits = list(pattern.outputs)
    else:
        g = _parse(Graph, data, args.input)
        bases = _parse_bases(args.bases, g.n)
        qubits = [q for q, b in enumerate(bases) if b is not None]
        fixed = _parse_outcomes(args.outcomes, qubits, g.n)
        table = _graph_table(g, bases, fixed, args)
    _emit(_table_text(table, qubits, args.format), args.out)
    return EXIT_OK


def cmd_compile(args) -> int:
    circuit = _parse(mqc.CircuitIR, _load_json(args.circuit), args.circuit)
    pattern = mqc.compile_to_pattern(circuit)
    if args.check:
        tv = mqc.total_variation(mqc.pattern_distribution(pattern, args.dense_cap), mqc.circuit_distribution(circuit))
        if tv > _CHECK_TOL:
            raise CheckFailed(f"compiled pattern deviates from the circuit (total variation {tv:.3g})")
    _emit(_dumps(pattern.to_json()), args.out)
    return EXIT_OK


def cmd_ttn(args) -> int:
    g = _load_graph(args.graph)
    if g.n > args.dense_cap:
        raise CapExceededError(f"{g.n} qubits exceeds the dense-state cap {args.dense_cap}")
    if args.tree is not None:
        tree = _parse(TreeLayout, _load_json(args.tree), args.tree)
    else:
        if g.n < 2 or not g.is_connected():
            raise UsageError("pass --tree for graphs that are disconnected or have fewer than 2 vertices")
        tree = rank_width(g, tree_cap=args.tree_cap, exact_cap=args.exact_cap)[1]
    if tree.leaves != g.n:
        raise UsageError(f"tree has {tree.leaves} leaves, graph has {g.n} vertices")
    state = dense.graph_state(g, args.dense_cap)
    net = ttn_from_dense(state, tree, cap=args.dense_cap)
    masks = tree.edge_masks()
    rows = []
    for edge, dim in sorted(ttn_bond_dims(net).items()):
        rows.append([edge[0], edge[1], dim, cut_rank_mask(g, masks[edge])])
    if args.check:
        from .ttn import ttn_to_dense

        err = float(np.max(np.abs(ttn_to_dense(net).amplitudes - state.amplitudes)))
        if err > _CHECK_TOL:
            raise CheckFailed(f"TTN reconstruction error {err:.3g}")
        for u, v, dim, rank in rows:
            if dim != 1 << rank:
                raise CheckFailed(f"bond ({u}, {v}) has dimension {dim}, expected 2^{rank}")
    if args.format == "csv":
        text = _csv(["u", "v", "bond_dim", "cut_rank"], rows)
    else:
        text = _dumps(
            {
                "tree": tree.to_json(),
                "parameters": net.parameter_count(),
                "max_bond_dim": max((r[2] for r in rows), default=1),
                "bonds": [{"edge": [u, v], "bond_dim": d, "cut_rank": r} for u, v, d, r in rows],
            }
        )
    _emit(text, args.out)
    return EXIT_OK


def _suite_config(args) -> bounds.SuiteConfig:
    data = dict(_load_json(args.config)) if args.config else {}
    for key, value in (
        ("seed", args.seed),
        ("treeCap", args.tree_cap),
        ("exactCap", args.exact_cap),
        ("twdCap", args.twd_cap),
        ("denseCap", args.dense_cap),
    ):
        if value is not None:
            data[key] = value
    try:
        return bounds.SuiteConfig.from_mapping(data)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad suite config: {exc}") from exc


def cmd_verify(args) -> int:
    config = _suite_config(args)
    reports = list(bounds.run_suite(config))
    if args.format == "csv":
        text = bounds.reports_to_csv(reports)
    else:
        text = bounds.reports_to_jsonl(reports)
    _emit(text, args.out)
    failed = [r for r in reports if not r.passed]
    for r in failed:
        bad = sorted(k for k, v in r.verdicts().items() if v is False)
        print(f"FAIL {r.graph_id}: {', '.join(bad)}; graph {r.graph.dumps()}", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_extract_pairs(args) -> int:
    g = _load_graph(args.graph)
    try:
        side = [int(x) for x in args.side_a.split(",") if x.strip()]
        p = Bipartition.from_side(g.n, side)
    except ValueError as exc:
        raise UsageError(f"bad --side-a: {exc}") from exc
    try:
        pairs, trace = bounds.extract_pairs(g, p)
    except ExtractionStallError as exc:
        print(f"stall: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    rank = cut_rank_mask(g, p.mask_a)
    if args.format == "csv":
        text = _csv(["step", "op", "cut_rank", "edges"], [[i, s.op, s.cut_rank, len(s.graph.edges())] for i, s in enumerate(trace)])
    else:
        text = _dumps(
            {
                "A": sorted(p.side_a),
                "pairs": pairs,
                "cut_rank": rank,
                "trace": [s.to_json() for s in trace],
            }
        )
    _emit(text, args.out)
    if args.check and pairs > rank:
        print(f"FAIL: {pairs} pairs exceed cut-rank {rank}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# parser


def _positive_cap(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("caps must be at least 2")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="randomness seed (default 0)")
    common.add_argument("--dense-cap", type=_positive_cap, default=None, help="max qubits for dense states")
    common.add_argument("--tree-cap", type=_positive_cap, default=None, help="max leaves for layout enumeration")
    common.add_argument("--exact-cap", type=_positive_cap, default=None, help="max vertices for the exact subset search")
    common.add_argument("--twd-cap", type=_positive_cap, default=None, help="max vertices for exact treewidth")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    common.add_argument("--check", action="store_true", help="cross-check against the dense oracle")
    common.add_argument("--out", default=None, help="output file (written atomically); stdout if omitted")

    parser = argparse.ArgumentParser(prog="mqcwidth", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("widths", parents=[common], help="exact cc, rwd and twd of a graph")
    p.add_argument("graph")
    p.set_defaults(func=cmd_widths)

    p = sub.add_parser("simulate", parents=[common], help="exact outcome probabilities")
    p.add_argument("input", help="graph, pattern or circuit JSON")
    p.add_argument("--bases", default=None, help="graph input: one of x/y/z/- per qubit (default all z)")
    p.add_argument("--outcomes", default=None, help="graph input: one of 0/1/*/- per qubit")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compile", parents=[common], help="circuit JSON to measurement-pattern JSON")
    p.add_argument("circuit")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("ttn", parents=[common], help="tree tensor network of a graph state; bond dimensions")
    p.add_argument("graph")
    p.add_argument("--tree", default=None, help="TreeLayout JSON (default: a rank-width optimal layout)")
    p.set_defaults(func=cmd_ttn)

    p = sub.add_parser(
        "verify",
        parents=[common],
        help="run the bounds suite (JSON-lines, or CSV with --format csv)",
        description="Columns of the CSV output: " + ", ".join(bounds.CSV_COLUMNS),
    )
    p.add_argument("config", nargs="?", default=None, help="suite config JSON (default config if omitted)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("extract-pairs", parents=[common], help="pair extraction trace for a bipartition")
    p.add_argument("graph")
    p.add_argument("--side-a", required=True, help="comma-separated vertices of side A")
    p.set_defaults(func=cmd_extract_pairs)
    return parser


def _fill_defaults(args) -> None:
    if args.dense_cap is None and args.command != "verify":
        args.dense_cap = dense.DEFAULT_DENSE_CAP
    if args.command != "verify":
        args.tree_cap = args.tree_cap or DEFAULT_TREE_CAP
        args.exact_cap = args.exact_cap or DEFAULT_EXACT_CAP
        args.twd_cap = args.twd_cap or DEFAULT_TWD_CAP
        args.seed = 0 if args.seed is None else args.seed


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _fill_defaults(args)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (CapExceededError, MemoryError) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except OutcomeSpecError as exc:
        print(f"inconsistent outcome spec: {exc}", file=sys.stderr)
        return EXIT_OUTCOME
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
