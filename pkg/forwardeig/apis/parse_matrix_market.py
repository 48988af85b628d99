from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from util import get_logger
from ..checks import check_symmetric

logger = get_logger(__name__)

SUPPORTED_FIELDS = ("real", "double", "integer")
SUPPORTED_SYMMETRY = ("general", "symmetric")


class MatrixMarketParseError(ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _parse_float(token, lineno):
    try:
        return float(token.replace("D", "e").replace("d", "e"))
    except ValueError:
        raise MatrixMarketParseError(lineno, f"cannot read value {token!r}")


def _parse_int(token, lineno):
    try:
        return int(token)
    except ValueError:
        raise MatrixMarketParseError(lineno, f"cannot read index {token!r}")


def _parse_header(line, lineno):
    parts = line.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
        raise MatrixMarketParseError(lineno, "missing '%%MatrixMarket matrix <format> <field> <symmetry>' header")
    fmt, field, symmetry = parts[2:]
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketParseError(lineno, f"unknown format {fmt!r}")
    if field == "pattern":
        raise MatrixMarketParseError(lineno, "pattern-only files carry no values")
    if field not in SUPPORTED_FIELDS:
        raise MatrixMarketParseError(lineno, f"field {field!r} is not real")
    if symmetry not in SUPPORTED_SYMMETRY:
        raise MatrixMarketParseError(lineno, f"symmetry {symmetry!r} is not supported")
    return fmt, symmetry


def _data_lines(lines):
    """(1-based line number, tokens) for every non-comment, non-blank line after the header."""
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        yield lineno, stripped.split()


def _read_coordinate(body, symmetric, header_line):
    try:
        lineno, size = next(body)
    except StopIteration:
        raise MatrixMarketParseError(header_line, "missing size line")
    if len(size) != 3:
        raise MatrixMarketParseError(lineno, "size line must read 'rows cols nnz'")
    rows, cols, nnz = (_parse_int(t, lineno) for t in size)
    if symmetric and rows != cols:
        raise MatrixMarketParseError(lineno, f"symmetric storage needs a square matrix, got {rows}x{cols}")

    I, J, V = [], [], []
    last = lineno
    for lineno, tokens in body:
        last = lineno
        if len(tokens) != 3:
            raise MatrixMarketParseError(lineno, f"expected 'row col value', got {len(tokens)} token(s)")
        i, j = _parse_int(tokens[0], lineno), _parse_int(tokens[1], lineno)
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise MatrixMarketParseError(lineno, f"index ({i}, {j}) outside {rows}x{cols}")
        if symmetric and j > i:
            raise MatrixMarketParseError(lineno, f"symmetric storage lists the lower triangle only, got ({i}, {j})")
        v = _parse_float(tokens[2], lineno)
        I.append(i - 1)
        J.append(j - 1)
        V.append(v)
        if symmetric and i != j:
            I.append(j - 1)
            J.append(i - 1)
            V.append(v)
    stored = len(V) if not symmetric else sum(1 for i, j in zip(I, J) if i >= j)
    if stored != nnz:
        raise MatrixMarketParseError(last, f"size line announces {nnz} entries, found {stored}")
    return sp.coo_matrix(
        (np.array(V, dtype=np.float64), (np.array(I, dtype=np.int64), np.array(J, dtype=np.int64))),
        shape=(rows, cols),
    )


def _read_array(body, symmetric, header_line):
    try:
        lineno, size = next(body)
    except StopIteration:
        raise MatrixMarketParseError(header_line, "missing size line")
    if len(size) != 2:
        raise MatrixMarketParseError(lineno, "size line must read 'rows cols'")
    rows, cols = (_parse_int(t, lineno) for t in size)
    if symmetric and rows != cols:
        raise MatrixMarketParseError(lineno, f"symmetric storage needs a square matrix, got {rows}x{cols}")

    # column-major; symmetric files hold the lower triangle column by column
    if symmetric:
        positions = [(i, j) for j in range(cols) for i in range(j, rows)]
    else:
        positions = [(i, j) for j in range(cols) for i in range(rows)]
    M = np.zeros((rows, cols), dtype=np.float64)
    count = 0
    last = lineno
    for lineno, tokens in body:
        last = lineno
        if len(tokens) != 1:
            raise MatrixMarketParseError(lineno, f"expected one value per line, got {len(tokens)}")
        if count >= len(positions):
            raise MatrixMarketParseError(lineno, "more values than the size line allows")
        i, j = positions[count]
        M[i, j] = _parse_float(tokens[0], lineno)
        if symmetric:
            M[j, i] = M[i, j]
        count += 1
    if count != len(positions):
        raise MatrixMarketParseError(last, f"expected {len(positions)} values, found {count}")
    return sp.coo_matrix(M)


class MatrixMarketReader:
    """Reads MatrixMarket files into CSR; parsed files are cached by resolved path."""

    def __init__(self):
        self.library = {}

    def _process_file(self, path):
        key = str(path.resolve())
        if key not in self.library:
            lines = path.read_text().splitlines()
            if not lines:
                raise MatrixMarketParseError(1, "empty file")
            fmt, symmetry = _parse_header(lines[0], 1)
            body = _data_lines(lines)
            reader = _read_coordinate if fmt == "coordinate" else _read_array
            coo = reader(body, symmetry == "symmetric", 1)
            A = coo.tocsr()
            A.sum_duplicates()
            self.library[key] = A
            logger.info(f"Loaded {path.name}: {A.shape[0]}x{A.shape[1]}, {A.nnz} stored entries ({fmt}, {symmetry})")
        return self.library[key]

    def read(self, path):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"MatrixMarket file not found: {path}")
        return self._process_file(path).copy()


matrix_market_reader = MatrixMarketReader()


def write_matrix_market(path, A):
    """Write A with 17 significant digits, lower triangle only when A is exactly symmetric.

    scipy appends ``.mtx`` to names without it; the path actually written is returned.
    """
    A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
    symmetry = "symmetric" if check_symmetric(A) == "ok" else "general"
    target = Path(path)
    if target.suffix != ".mtx":
        target = target.with_name(target.name + ".mtx")
    scipy.io.mmwrite(str(target), A, precision=17, symmetry=symmetry)
    logger.info(f"Wrote {target} ({symmetry}, {A.nnz} stored entries)")
    return target
