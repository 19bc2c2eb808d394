"""Command line interface: ``resparsify {sparsify,game,verify}``.

Exit codes for ``sparsify``: 0 certified, 1 I/O or usage error, 2 spectral
check failed, 3 sparsifier failed. ``verify`` exits 0 iff the candidate
passes, 2 if it does not, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import report as report_mod
from .experiments import default_threads, run_game_trials, run_sparsify
from .game import STRATEGY_NAMES
from .io import (
    FORMATS,
    GraphError,
    MatrixParseError,
    edges_to_incidence_rows,
    infer_format,
    iter_row_chunks,
    read_edges,
    read_matrix,
    write_edges,
    write_matrix,
)
from .linalg import DimensionError, gram, spectral_check
from .sparsifier import PICK_ORDERS, SparsifierConfig
from .streams import ROW_GENERATORS

log = logging.getLogger("resparsify")

EXIT_OK, EXIT_IO, EXIT_SPECTRAL, EXIT_FAILED = 0, 1, 2, 3


def _emit_report(report: dict, path) -> None:
    text = report_mod.dumps(report)
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _peek_dim(path: str, fmt: str) -> int:
    for block in iter_row_chunks(path, fmt, chunk=1):
        return block.shape[1]
    raise MatrixParseError("input has no rows")


def cmd_sparsify(args) -> int:
    try:
        if args.graph:
            graph = read_edges(args.input, args.vertices)
            dim = graph.n_vertices
            chunks = edges_to_incidence_rows(graph, chunk=65536)
        else:
            fmt = args.format or infer_format(args.input)
            dim = _peek_dim(args.input, fmt)
            chunks = iter_row_chunks(args.input, fmt, dim)
        config = SparsifierConfig(
            epsilon=args.epsilon, dim=dim, rng_seed=args.seed, scale=args.scale,
            certify_each_round=args.certify_each_round,
            audit_stale_leverage=args.audit_leverage, pick_order=args.pick_order,
        )
        sp, output, report = run_sparsify(chunks, config)
        log.debug("%d rows, %d rounds, %d output rows", report["rows_seen"], report["rounds"],
                  report["output_rows"])
    except (OSError, MatrixParseError, GraphError, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if output is not None and args.output:
            if args.graph:
                ids = sp.origin_ids
                write_edges(args.output, graph.u[ids], graph.v[ids],
                            graph.weight[ids] * sp.weights)
            else:
                write_matrix(args.output, output, fmt)
        _emit_report(report, args.report)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    if report["failure"]:
        print(f"sparsifier failed: {report['failure']}", file=sys.stderr)
        return EXIT_FAILED
    if not report["spectral"]["passed"]:
        s = report["spectral"]
        print(f"spectral check failed: lambda in [{s['lambda_min']}, {s['lambda_max']}]",
              file=sys.stderr)
        return EXIT_SPECTRAL
    return EXIT_OK


def cmd_game(args) -> int:
    if args.strategy not in STRATEGY_NAMES:
        print(f"error: unknown strategy {args.strategy!r}; built-ins: {', '.join(STRATEGY_NAMES)}",
              file=sys.stderr)
        return EXIT_IO
    try:
        report = run_game_trials(
            dim=args.dim, n_rows=args.rows, epsilon=args.epsilon, strategy=args.strategy,
            trials=args.trials, seed=args.seed, augmented=args.augmented,
            row_gen=args.row_gen, c=args.c, threads=args.threads,
        )
        _emit_report(report, args.report)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _load_for_verify(path: str, args) -> np.ndarray:
    if args.graph:
        graph = read_edges(path, args.vertices)
        return np.vstack(list(edges_to_incidence_rows(graph, chunk=65536)))
    return read_matrix(path, args.format)


def cmd_verify(args) -> int:
    try:
        if args.graph and args.vertices is None:
            # both graphs must live on the same vertex set
            n = max(read_edges(args.original).n_vertices, read_edges(args.candidate).n_vertices)
            args.vertices = n
        A = _load_for_verify(args.original, args)
        B = _load_for_verify(args.candidate, args)
        if A.shape[1] != B.shape[1]:
            raise DimensionError(f"original has {A.shape[1]} columns, candidate {B.shape[1]}")
        result = spectral_check(gram(B), gram(A), args.epsilon)
    except (OSError, MatrixParseError, GraphError, DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if result.passed else EXIT_SPECTRAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resparsify", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sparsify", help="stream a matrix or graph through the sampler")
    p.add_argument("--input", required=True, help="input path, '-' for stdin")
    p.add_argument("--format", choices=FORMATS, help="matrix format (inferred from extension)")
    p.add_argument("--graph", action="store_true", help="input is a 'u v w' edge list")
    p.add_argument("--vertices", type=int, help="vertex count for --graph (default: max id + 1)")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiplier on the oversampling constant c (1.0 = default)")
    p.add_argument("--pick-order", choices=PICK_ORDERS, default="ascending")
    p.add_argument("--certify-each-round", action="store_true")
    p.add_argument("--audit-leverage", action="store_true",
                   help="record stale-leverage ratios against all rows seen")
    p.add_argument("--output", help="where to write the sparsifier")
    p.add_argument("--report", help="where to write the JSON report (default: stdout)")
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("game", help="Monte Carlo of the doubling/deletion adversary game")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--strategy", default="sequential", help=", ".join(STRATEGY_NAMES))
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--augmented", action="store_true", help="keep playing after a win")
    p.add_argument("--row-gen", choices=ROW_GENERATORS, default="gaussian")
    p.add_argument("--c", type=float, help="override the oversampling constant")
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--report", help="where to write the JSON report (default: stdout)")
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("verify", help="check a candidate against an original matrix")
    p.add_argument("--original", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--graph", action="store_true")
    p.add_argument("--vertices", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
