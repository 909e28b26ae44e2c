"""Matrix Market coordinate reader (real/integer/pattern, general/symmetric)."""

import logging
import numpy as np
import scipy.sparse as sp
from pathlib import Path
from typing import Union

from .errors import MatrixMarketParseError, OutputError
from .models import SparseMatrix

logger = logging.getLogger(__name__)

SUPPORTED_FIELDS = ("real", "integer", "pattern")
SUPPORTED_SYMMETRY = ("general", "symmetric")


def _parse_banner(line: str):
    tokens = line.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket":
        raise MatrixMarketParseError(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>' banner")
    _, obj, layout, field, symmetry = tokens
    if obj != "matrix" or layout != "coordinate":
        raise MatrixMarketParseError(1, f"only 'matrix coordinate' files are supported, got '{obj} {layout}'")
    if field == "complex":
        raise MatrixMarketParseError(1, "complex matrices are not supported")
    if field not in SUPPORTED_FIELDS:
        raise MatrixMarketParseError(1, f"unsupported field '{field}'")
    if symmetry not in SUPPORTED_SYMMETRY:
        raise MatrixMarketParseError(1, f"unsupported symmetry '{symmetry}'")
    return field, symmetry


def parse_matrix_market(text: str) -> SparseMatrix:
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketParseError(1, "empty file")
    field, symmetry = _parse_banner(lines[0])

    line_no = 1
    size = None
    rows, cols, vals = [], [], []
    expected = 0
    for raw in lines[1:]:
        line_no += 1
        stripped = raw.strip()
        if not stripped or stripped.startswith("%"):
            continue
        tokens = stripped.split()
        if size is None:
            try:
                size = tuple(int(t) for t in tokens)
            except ValueError:
                raise MatrixMarketParseError(line_no, f"malformed size line '{stripped}'")
            if len(size) != 3 or min(size) < 0:
                raise MatrixMarketParseError(line_no, "size line must be 'rows cols entries'")
            expected = size[2]
            continue

        want = 2 if field == "pattern" else 3
        if len(tokens) != want:
            raise MatrixMarketParseError(line_no, f"expected {want} fields, got {len(tokens)}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
            v = 1.0 if field == "pattern" else float(tokens[2])
        except ValueError:
            raise MatrixMarketParseError(line_no, f"malformed entry '{stripped}'")
        if not (1 <= i <= size[0] and 1 <= j <= size[1]):
            raise MatrixMarketParseError(line_no, f"index ({i}, {j}) outside {size[0]} x {size[1]}")
        if not np.isfinite(v):
            raise MatrixMarketParseError(line_no, "non-finite value")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symmetry == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)

    if size is None:
        raise MatrixMarketParseError(line_no, "missing size line")
    if symmetry == "symmetric" and size[0] != size[1]:
        raise MatrixMarketParseError(line_no, "symmetric matrix must be square")
    stored = sum(1 for r, c in zip(rows, cols) if symmetry == "general" or r >= c)
    if stored != expected:
        raise MatrixMarketParseError(line_no, f"size line declares {expected} entries, found {stored}")

    # duplicates are summed by the COO -> CSR conversion
    coo = sp.coo_matrix((np.array(vals, dtype=np.float64), (np.array(rows, dtype=np.int64),
                                                            np.array(cols, dtype=np.int64))),
                        shape=(size[0], size[1]))
    matrix = SparseMatrix.from_scipy(coo)
    if matrix.explicit_zeros:
        logger.warning(f"matrix stores {matrix.explicit_zeros} explicit zero entries")
    return matrix


def load_matrix_market(path: Union[str, Path]) -> SparseMatrix:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise OutputError(f"cannot read {path}: {e}")
    matrix = parse_matrix_market(text)
    logger.info(f"loaded {path.name}: {matrix.nrows} x {matrix.ncols}, {matrix.nnz} stored entries")
    return matrix
