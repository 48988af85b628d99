import numpy as np
import pytest
import scipy.sparse as sp

from forwardeig.apis.parse_matrix_market import (
    MatrixMarketParseError,
    MatrixMarketReader,
    write_matrix_market,
)

SYMMETRIC_2X2 = """%%MatrixMarket matrix coordinate real symmetric
% a comment
2 2 3
1 1 4.0
2 1 1.0
2 2 3.0
"""


@pytest.fixture
def reader():
    return MatrixMarketReader()


def test_symmetric_coordinate(reader, tmp_mtx):
    A = reader.read(tmp_mtx("a.mtx", SYMMETRIC_2X2))
    assert A.format == "csr"
    np.testing.assert_array_equal(A.toarray(), [[4.0, 1.0], [1.0, 3.0]])


def test_explicit_zero_is_kept(reader, tmp_mtx):
    text = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n1 2 0.0\n2 2 2.0\n"
    A = reader.read(tmp_mtx("z.mtx", text))
    assert A.nnz == 3
    np.testing.assert_array_equal(A.toarray(), [[1.0, 0.0], [0.0, 2.0]])


def test_array_format(reader, tmp_mtx):
    text = "%%MatrixMarket matrix array real symmetric\n2 2\n4.0\n1.0\n3.0\n"
    A = reader.read(tmp_mtx("arr.mtx", text))
    np.testing.assert_array_equal(A.toarray(), [[4.0, 1.0], [1.0, 3.0]])


def test_fortran_exponent(reader, tmp_mtx):
    text = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1.5D-3\n"
    assert reader.read(tmp_mtx("d.mtx", text))[0, 0] == 1.5e-3


@pytest.mark.parametrize("header", [
    "%%MatrixMarket matrix coordinate pattern symmetric",
    "%%MatrixMarket matrix coordinate complex general",
    "%%MatrixMarket matrix coordinate real hermitian",
    "%%MatrixMarket matrix coordinate real skew-symmetric",
    "%MatrixMarket matrix coordinate real general",
])
def test_rejected_headers(reader, tmp_mtx, header):
    with pytest.raises(MatrixMarketParseError) as info:
        reader.read(tmp_mtx("h.mtx", header + "\n1 1 1\n1 1 1.0\n"))
    assert info.value.line == 1


@pytest.mark.parametrize("body, line", [
    ("2 2 2\n1 1 1.0\n3 1 1.0\n", 4),
    ("2 2 2\n1 1 1.0\n1 2 1.0\n", 4),
    ("2 2 3\n1 1 1.0\n2 2 2.0\n", 4),
    ("2 2 1\n1 1 abc\n", 3),
    ("2 2\n", 2),
])
def test_error_line_numbers(reader, tmp_mtx, body, line):
    text = "%%MatrixMarket matrix coordinate real symmetric\n" + body
    with pytest.raises(MatrixMarketParseError) as info:
        reader.read(tmp_mtx("e.mtx", text))
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_missing_file(reader, tmp_path):
    with pytest.raises(FileNotFoundError):
        reader.read(tmp_path / "absent.mtx")


def test_cache_returns_copies(reader, tmp_mtx):
    path = tmp_mtx("c.mtx", SYMMETRIC_2X2)
    first = reader.read(path)
    first.data[:] = 0.0
    assert reader.read(path)[0, 0] == 4.0
    assert len(reader.library) == 1


def test_write_round_trip(reader, tmp_path, rng):
    M = rng.standard_normal((5, 5))
    M = (M + M.T) * 0.5
    path = write_matrix_market(tmp_path / "sym", M)
    assert path.suffix == ".mtx"
    assert "symmetric" in path.read_text().splitlines()[0]
    np.testing.assert_array_equal(reader.read(path).toarray(), M)


def test_write_general(reader, tmp_path):
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    path = write_matrix_market(tmp_path / "g.mtx", M)
    assert "general" in path.read_text().splitlines()[0]
    np.testing.assert_array_equal(reader.read(path).toarray(), M)
