import numpy as np
import pytest

from resparsify.io import (
    FORMATS,
    GraphError,
    GraphSource,
    MatrixParseError,
    edges_to_incidence_rows,
    incidence_matrix,
    infer_format,
    iter_row_chunks,
    read_edges,
    read_matrix,
    write_edges,
    write_matrix,
)
from resparsify.linalg import gram, leverage_scores

EXT = {
    "csv": "csv",
    "binary-f64-rows": "bin",
    "matrix-market-array": "mtx",
    "matrix-market-coordinate": "mtx",
}


@pytest.fixture
def awkward_matrix():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((23, 5))
    A[0, 0] = 1e-300
    A[1, 1] = -0.1
    A[2, :] = 0.0
    A[3, 2] = 1 / 3
    A[4, 4] = 1e300
    return A


@pytest.mark.parametrize("fmt", FORMATS)
def test_round_trip_is_exact(tmp_path, awkward_matrix, fmt):
    path = tmp_path / f"a.{EXT[fmt]}"
    write_matrix(str(path), awkward_matrix, fmt)
    back = read_matrix(str(path), fmt)
    assert back.dtype == np.float64
    assert back.tobytes() == awkward_matrix.tobytes()


def test_binary_layout(tmp_path):
    A = np.arange(6, dtype=float).reshape(2, 3)
    path = tmp_path / "a.bin"
    write_matrix(str(path), A, "binary-f64-rows")
    raw = path.read_bytes()
    assert int.from_bytes(raw[:8], "little") == 3
    assert np.frombuffer(raw[8:], "<f8").tolist() == A.ravel().tolist()


def test_chunks_cover_all_rows(tmp_path, awkward_matrix):
    for fmt in FORMATS:
        path = tmp_path / f"b.{EXT[fmt]}"
        write_matrix(str(path), awkward_matrix, fmt)
        blocks = list(iter_row_chunks(str(path), fmt, 5, chunk=4))
        assert all(b.shape[0] <= 4 for b in blocks)
        np.testing.assert_array_equal(np.vstack(blocks), awkward_matrix)


def test_infer_format():
    assert infer_format("x.csv") == "csv"
    assert infer_format("x.bin") == "binary-f64-rows"
    with pytest.raises(ValueError):
        infer_format("x.unknown")


def test_malformed_csv_reports_line(tmp_path):
    lines = ["1,2,3"] * 6 + ["1,oops,3"] + ["1,2,3"]
    path = tmp_path / "bad.csv"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MatrixParseError) as err:
        read_matrix(str(path))
    assert err.value.line == 7
    assert "line 7" in str(err.value)


def test_ragged_csv_reports_line(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("# header comment\n1,2\n\n3,4,5\n")
    with pytest.raises(MatrixParseError) as err:
        read_matrix(str(path))
    assert err.value.line == 4


def test_csv_rejects_non_finite(tmp_path):
    path = tmp_path / "nan.csv"
    path.write_text("1,2\nnan,1\n")
    with pytest.raises(MatrixParseError, match="line 2"):
        read_matrix(str(path))


def test_binary_header_errors(tmp_path):
    short = tmp_path / "short.bin"
    short.write_bytes(b"\x03\x00")
    with pytest.raises(MatrixParseError, match="header"):
        read_matrix(str(short))

    wrong = tmp_path / "wrong.bin"
    write_matrix(str(wrong), np.ones((2, 3)), "binary-f64-rows")
    with pytest.raises(MatrixParseError):
        read_matrix(str(wrong), dim=4)

    trunc = tmp_path / "trunc.bin"
    trunc.write_bytes(wrong.read_bytes()[:-8])
    with pytest.raises(MatrixParseError, match="truncated"):
        read_matrix(str(trunc))


def test_read_edges(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# triangle\n0 1 2.5\n1 2   # unit weight\n\n2 0 0.5\n")
    g = read_edges(str(path))
    assert g.n_vertices == 3
    assert g.u.tolist() == [0, 1, 2]
    assert g.v.tolist() == [1, 2, 0]
    assert g.weight.tolist() == [2.5, 1.0, 0.5]
    assert read_edges(str(path), n_vertices=5).n_vertices == 5


@pytest.mark.parametrize("line,needle", [
    ("0 0 1", "self-loop"),
    ("0 1 -2", "positive"),
    ("0 1 0", "positive"),
    ("0 x", "parse"),
    ("0 1 2 3", "expected"),
])
def test_bad_edges(tmp_path, line, needle):
    path = tmp_path / "g.txt"
    path.write_text(f"0 1\n{line}\n")
    with pytest.raises(MatrixParseError, match=needle) as err:
        read_edges(str(path))
    assert err.value.line == 2


def test_graph_source_validation():
    with pytest.raises(GraphError):
        GraphSource([0], [3], [1.0], 3)
    with pytest.raises(GraphError):
        GraphSource([0, 1], [1], [1.0], 3)


def test_write_edges_round_trip(tmp_path):
    path = tmp_path / "g.txt"
    write_edges(str(path), [0, 2], [1, 3], [0.1, 1 / 3])
    g = read_edges(str(path))
    assert g.weight.tolist() == [0.1, 1 / 3]


def test_triangle_laplacian():
    g = GraphSource([0, 1, 2], [1, 2, 0], [1.0, 1.0, 1.0], 3)
    L = gram(incidence_matrix(g)).matrix
    np.testing.assert_allclose(L, [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], atol=1e-15)


def test_single_weighted_edge_row():
    g = GraphSource([0], [1], [4.0], 2)
    (row,) = list(edges_to_incidence_rows(g))
    np.testing.assert_array_equal(row, [2.0, -2.0])


def test_path_graph_edges_are_bridges():
    g = GraphSource([0, 1, 2], [1, 2, 3], [1.0, 3.0, 0.5], 4)
    np.testing.assert_allclose(leverage_scores(incidence_matrix(g)), 1.0, atol=1e-10)


def test_connected_graph_rank_and_resistances():
    rng = np.random.default_rng(1)
    n = 12
    edges = [(i, i + 1) for i in range(n - 1)]
    edges += [tuple(rng.choice(n, 2, replace=False)) for _ in range(20)]
    u, v = zip(*edges)
    w = rng.uniform(0.5, 2.0, len(edges))
    g = GraphSource(u, v, w, n)
    B = incidence_matrix(g)
    lev = leverage_scores(B)
    assert lev.sum() == pytest.approx(n - 1, abs=1e-8)
    # leverage of an edge = w_e * effective resistance between its endpoints
    Lp = np.linalg.pinv(gram(B).matrix)
    for k, (a, b) in enumerate(edges):
        chi = np.zeros(n)
        chi[a], chi[b] = 1, -1
        assert lev[k] == pytest.approx(w[k] * chi @ Lp @ chi, abs=1e-9)


def test_chunked_incidence_matches_one_at_a_time():
    g = GraphSource([0, 1, 2, 0], [1, 2, 3, 3], [1.0, 2.0, 3.0, 4.0], 4)
    a = np.vstack(list(edges_to_incidence_rows(g)))
    b = np.vstack(list(edges_to_incidence_rows(g, chunk=3)))
    np.testing.assert_array_equal(a, b)
