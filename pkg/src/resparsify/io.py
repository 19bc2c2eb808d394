"""Matrix and edge-list readers/writers, and graph-to-row conversion.

Supported matrix formats:

``csv``
    one row per line, comma separated; blank lines and ``#`` comments skipped.
``binary-f64-rows``
    little-endian ``uint64`` column count ``d``, then row-major ``float64`` data.
``matrix-market-array`` / ``matrix-market-coordinate``
    Matrix Market files; these are column-major or unordered, so they are
    loaded whole before being streamed out row by row.

Text writers use 17 significant digits (MM) or the shortest round-trip
representation (CSV), so values survive a write/read cycle exactly.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from typing import IO, Iterator, Optional

import numpy as np
import scipy.io
import scipy.sparse

__all__ = [
    "FORMATS",
    "MatrixParseError",
    "GraphError",
    "GraphSource",
    "infer_format",
    "iter_row_chunks",
    "read_matrix",
    "write_matrix",
    "read_edges",
    "write_edges",
    "edges_to_incidence_rows",
    "incidence_matrix",
]

FORMATS = ("matrix-market-array", "matrix-market-coordinate", "csv", "binary-f64-rows")
_HEADER = np.dtype("<u8")
_F64 = np.dtype("<f8")


class MatrixParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class GraphError(ValueError):
    pass


def infer_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        return "csv"
    if ext in (".bin", ".f64"):
        return "binary-f64-rows"
    if ext == ".mtx":
        with open(path, "r") as f:
            header = f.readline().lower()
        return "matrix-market-coordinate" if "coordinate" in header else "matrix-market-array"
    raise ValueError(f"cannot infer matrix format from {path!r}; pass --format")


def _open_text(path: str) -> IO[str]:
    return sys.stdin if path == "-" else open(path, "r")


def _iter_csv(path: str, dim: Optional[int], chunk: int) -> Iterator[np.ndarray]:
    f = _open_text(path)
    try:
        batch = []
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                row = [float(tok) for tok in text.split(",")]
            except ValueError as exc:
                raise MatrixParseError(f"cannot parse {text!r} ({exc})", lineno) from None
            if dim is None:
                dim = len(row)
            if len(row) != dim:
                raise MatrixParseError(f"expected {dim} values, found {len(row)}", lineno)
            if not all(np.isfinite(row)):
                raise MatrixParseError("non-finite value", lineno)
            batch.append(row)
            if len(batch) >= chunk:
                yield np.array(batch)
                batch = []
        if batch:
            yield np.array(batch)
    finally:
        if f is not sys.stdin:
            f.close()


def _iter_binary(path: str, dim: Optional[int], chunk: int) -> Iterator[np.ndarray]:
    f = sys.stdin.buffer if path == "-" else open(path, "rb")
    try:
        head = f.read(8)
        if len(head) != 8:
            raise MatrixParseError("missing 8-byte dimension header")
        d = int(np.frombuffer(head, dtype=_HEADER)[0])
        if d < 1 or (dim is not None and d != dim):
            raise MatrixParseError(f"header declares d={d}" + (f", expected {dim}" if dim else ""))
        row_bytes = 8 * d
        count = 0
        while True:
            buf = f.read(row_bytes * chunk)
            if not buf:
                break
            if len(buf) % row_bytes:
                raise MatrixParseError(f"truncated row after {count + len(buf) // row_bytes} rows")
            A = np.frombuffer(buf, dtype=_F64).reshape(-1, d).astype(np.float64)
            count += A.shape[0]
            yield A
    finally:
        if f is not sys.stdin.buffer:
            f.close()


def _read_mm(path: str) -> np.ndarray:
    try:
        M = scipy.io.mmread(sys.stdin.buffer if path == "-" else path)
    except (ValueError, IndexError) as exc:
        raise MatrixParseError(f"invalid Matrix Market file: {exc}") from None
    if scipy.sparse.issparse(M):
        M = M.toarray()
    return np.asarray(M, dtype=np.float64)


def iter_row_chunks(path: str, fmt: str, dim: Optional[int] = None,
                    chunk: int = 65536) -> Iterator[np.ndarray]:
    """Yield the matrix at ``path`` as consecutive ``(k, d)`` row blocks."""
    if fmt == "csv":
        yield from _iter_csv(path, dim, chunk)
    elif fmt == "binary-f64-rows":
        yield from _iter_binary(path, dim, chunk)
    elif fmt in ("matrix-market-array", "matrix-market-coordinate"):
        A = _read_mm(path)
        if dim is not None and A.shape[1] != dim:
            raise MatrixParseError(f"matrix has {A.shape[1]} columns, expected {dim}")
        for start in range(0, A.shape[0], chunk):
            yield A[start : start + chunk]
    else:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def read_matrix(path: str, fmt: Optional[str] = None, dim: Optional[int] = None) -> np.ndarray:
    fmt = fmt or infer_format(path)
    chunks = list(iter_row_chunks(path, fmt, dim))
    if not chunks:
        return np.zeros((0, dim or 0))
    return np.vstack(chunks)


def write_matrix(path: str, A: np.ndarray, fmt: str) -> None:
    A = np.asarray(A, dtype=np.float64)
    if fmt == "csv":
        with open(path, "w") as f:
            for row in A.tolist():
                f.write(",".join(repr(x) for x in row))
                f.write("\n")
    elif fmt == "binary-f64-rows":
        with open(path, "wb") as f:
            f.write(np.array([A.shape[1]], dtype=_HEADER).tobytes())
            f.write(np.ascontiguousarray(A, dtype=_F64).tobytes())
    elif fmt == "matrix-market-array":
        with open(path, "wb") as f:
            scipy.io.mmwrite(f, A, precision=17)
    elif fmt == "matrix-market-coordinate":
        with open(path, "wb") as f:
            scipy.io.mmwrite(f, scipy.sparse.coo_matrix(A), precision=17)
    else:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


# --- graphs -------------------------------------------------------------------

@dataclass
class GraphSource:
    """Weighted undirected edge list on vertices ``0 .. n_vertices-1``."""

    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray
    n_vertices: int

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.int64)
        self.v = np.asarray(self.v, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (self.u.shape == self.v.shape == self.weight.shape):
            raise GraphError("u, v and weight must have equal length")
        for k in range(self.u.size):
            u, v, w = self.u[k], self.v[k], self.weight[k]
            if u == v:
                raise GraphError(f"edge {k}: self-loop at vertex {u}")
            if not (w > 0 and np.isfinite(w)):
                raise GraphError(f"edge {k}: weight must be positive, got {w}")
            if min(u, v) < 0 or max(u, v) >= self.n_vertices:
                raise GraphError(f"edge {k}: vertex id out of range [0, {self.n_vertices})")

    @property
    def n_edges(self) -> int:
        return int(self.u.size)


def read_edges(path: str, n_vertices: Optional[int] = None) -> GraphSource:
    """Parse ``u v w`` lines (``w`` optional, default 1); ``#`` starts a comment."""
    us, vs, ws = [], [], []
    f = _open_text(path)
    try:
        for lineno, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise MatrixParseError(f"expected 'u v w', got {text!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise MatrixParseError(f"cannot parse {text!r}", lineno) from None
            if u == v:
                raise MatrixParseError(f"self-loop at vertex {u}", lineno)
            if not (w > 0 and np.isfinite(w)):
                raise MatrixParseError(f"weight must be positive, got {w}", lineno)
            if u < 0 or v < 0:
                raise MatrixParseError("negative vertex id", lineno)
            us.append(u)
            vs.append(v)
            ws.append(w)
    finally:
        if f is not sys.stdin:
            f.close()
    if n_vertices is None:
        n_vertices = max(max(us, default=-1), max(vs, default=-1)) + 1
    return GraphSource(np.array(us), np.array(vs), np.array(ws), n_vertices)


def write_edges(path: str, u, v, weight) -> None:
    with open(path, "w") as f:
        for a, b, w in zip(np.asarray(u).tolist(), np.asarray(v).tolist(),
                           np.asarray(weight, dtype=np.float64).tolist()):
            f.write(f"{a} {b} {w!r}\n")


def incidence_matrix(graph: GraphSource, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Rows ``sqrt(w) (e_u - e_v)`` for edges ``start:stop``; their Gram is the Laplacian."""
    stop = graph.n_edges if stop is None else stop
    k = np.arange(stop - start)
    B = np.zeros((stop - start, graph.n_vertices))
    s = np.sqrt(graph.weight[start:stop])
    B[k, graph.u[start:stop]] = s
    B[k, graph.v[start:stop]] = -s
    return B


def edges_to_incidence_rows(graph: GraphSource, chunk: Optional[int] = None) -> Iterator[np.ndarray]:
    """Stream incidence rows one edge at a time, or in ``chunk``-edge blocks."""
    if chunk is None:
        for k in range(graph.n_edges):
            yield incidence_matrix(graph, k, k + 1)[0]
    else:
        for start in range(0, graph.n_edges, chunk):
            yield incidence_matrix(graph, start, min(start + chunk, graph.n_edges))
