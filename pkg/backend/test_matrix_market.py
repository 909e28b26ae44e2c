import logging

import numpy as np
import pytest

from app.errors import MatrixMarketParseError, OutputError
from app.matrix_market import load_matrix_market, parse_matrix_market


GENERAL = """%%MatrixMarket matrix coordinate real general
% a comment
3 3 4
1 1 4.0
2 2 4.0
3 3 4.0
1 2 -1.5
"""


def test_parse_general():
    A = parse_matrix_market(GENERAL)
    np.testing.assert_array_equal(A.to_dense(), [[4.0, -1.5, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]])


def test_parse_symmetric_mirrors_off_diagonal():
    text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n"
    A = parse_matrix_market(text)
    np.testing.assert_array_equal(A.to_dense(), [[2.0, -1.0], [-1.0, 2.0]])
    assert A.is_symmetric()


def test_parse_pattern_and_integer():
    pattern = parse_matrix_market("%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 1\n2 2\n")
    np.testing.assert_array_equal(pattern.to_dense(), np.eye(2))
    integer = parse_matrix_market("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n")
    assert integer.entry(0, 0) == 7.0


def test_duplicates_are_summed():
    A = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1.5\n1 1 2.5\n")
    assert A.nnz == 1
    assert A.entry(0, 0) == 4.0


def test_explicit_zero_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="app.matrix_market"):
        parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 0.0\n")
    assert "explicit zero" in caplog.text


def test_complex_rejected_on_banner_line():
    with pytest.raises(MatrixMarketParseError) as info:
        parse_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 0.0\n")
    assert info.value.line == 1
    assert info.value.exit_code == 3


@pytest.mark.parametrize("text, line", [
    ("%%MatrixMarket matrix array real general\n1 1\n1.0\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2\n", 2),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n% c\n2 2 1\n1 1\n", 4),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3),
])
def test_parse_errors_report_line(text, line):
    with pytest.raises(MatrixMarketParseError) as info:
        parse_matrix_market(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_load_missing_file(tmp_path):
    with pytest.raises(OutputError):
        load_matrix_market(tmp_path / "missing.mtx")


def test_load_from_disk(tmp_path):
    path = tmp_path / "a.mtx"
    path.write_text(GENERAL)
    assert load_matrix_market(path).shape == (3, 3)
