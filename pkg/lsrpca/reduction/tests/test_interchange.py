import numpy as np
import pytest
import scipy.sparse as sp

from lsrpca.reduction.modules.exceptions import MatrixParseError
from lsrpca.reduction.modules.interchange import binarize
from lsrpca.reduction.modules.interchange import read_csv
from lsrpca.reduction.modules.interchange import read_labels
from lsrpca.reduction.modules.interchange import read_matrix_market
from lsrpca.reduction.modules.interchange import write_matrix_market
from lsrpca.reduction.modules.matrices import as_sparse
from lsrpca.reduction.modules.matrices import is_canonical

COORDINATE = """%%MatrixMarket matrix coordinate real general
% two nonzeros
3 2 2
1 1 1.5
3 2 -2.0
"""


def test_read_coordinate_file(tmp_path):
    path = tmp_path / "x.mtx"
    path.write_text(COORDINATE)
    x = read_matrix_market(path)
    assert sp.issparse(x)
    assert is_canonical(x)
    np.testing.assert_array_equal(x.toarray(), [[1.5, 0], [0, 0], [0, -2.0]])


def test_write_then_read_keeps_storage_kind(rng, tmp_path):
    dense = rng.standard_normal((4, 3)).astype(np.float32)
    sparse = as_sparse(np.where(dense > 0, dense, 0))
    dense_back = read_matrix_market(write_matrix_market(tmp_path / "dense", dense))
    sparse_back = read_matrix_market(write_matrix_market(tmp_path / "sparse", sparse))
    assert not sp.issparse(dense_back)
    assert sp.issparse(sparse_back)
    np.testing.assert_allclose(dense_back, dense, rtol=1e-6)
    np.testing.assert_allclose(sparse_back.toarray(), sparse.toarray(), rtol=1e-6)


def test_malformed_entry_reports_line(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text(COORDINATE.replace("3 2 -2.0", "3 x -2.0"))
    with pytest.raises(MatrixParseError) as excinfo:
        read_matrix_market(path)
    assert excinfo.value.line == 5
    assert "bad.mtx:5" in str(excinfo.value)


def test_out_of_range_index_reports_line(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text(COORDINATE.replace("3 2 -2.0", "4 2 -2.0"))
    with pytest.raises(MatrixParseError) as excinfo:
        read_matrix_market(path)
    assert excinfo.value.line == 5


def test_missing_file(tmp_path):
    with pytest.raises(MatrixParseError, match="file not found"):
        read_matrix_market(tmp_path / "absent.mtx")


def test_read_csv_with_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(read_csv(path, skip_header=True), [[1, 2], [3, 4]])


def test_read_csv_tab_delimited(tmp_path):
    path = tmp_path / "x.tsv"
    path.write_text("1\t2\n3\t4\n")
    assert read_csv(path, "\t").shape == (2, 2)


def test_read_csv_reports_first_bad_row(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("1,2\n3,4\n5,oops\n")
    with pytest.raises(MatrixParseError) as excinfo:
        read_csv(path)
    assert excinfo.value.line == 3


def test_read_labels(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_text("0\n2\n\n1\n")
    np.testing.assert_array_equal(read_labels(path), [0, 2, 1])


def test_read_labels_rejects_negative(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_text("0\n-1\n")
    with pytest.raises(MatrixParseError) as excinfo:
        read_labels(path)
    assert excinfo.value.line == 2


def test_binarize_sparse_and_dense():
    x = np.array([[0.0, 3.0], [2.0, 0.0]])
    np.testing.assert_array_equal(binarize(x), [[0, 1], [1, 0]])
    sparse = binarize(as_sparse(x))
    assert sp.issparse(sparse)
    np.testing.assert_array_equal(sparse.toarray(), [[0, 1], [1, 0]])
