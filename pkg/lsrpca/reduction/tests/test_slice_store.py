import json
import logging
import tempfile
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lsrpca.reduction.modules.exceptions import CorruptSliceError
from lsrpca.reduction.modules.exceptions import FirstSliceTooShortError
from lsrpca.reduction.modules.exceptions import PreconditionError
from lsrpca.reduction.modules.exceptions import ShapeError
from lsrpca.reduction.modules.exceptions import SliceNotFoundError
from lsrpca.reduction.modules.exceptions import StorageError
from lsrpca.reduction.modules.matrices import as_sparse
from lsrpca.reduction.modules.slice_store import MANIFEST_NAME
from lsrpca.reduction.modules.slice_store import SliceStoreWriter
from lsrpca.reduction.modules.slice_store import StorageKind
from lsrpca.reduction.modules.slice_store import concatenate
from lsrpca.reduction.modules.slice_store import decode_slice
from lsrpca.reduction.modules.slice_store import encode_slice
from lsrpca.reduction.modules.slice_store import load_labels
from lsrpca.reduction.modules.slice_store import open_store
from lsrpca.reduction.modules.slice_store import partition
from lsrpca.reduction.modules.slice_store import save_labels
from lsrpca.reduction.modules.slice_store import select_rows
from lsrpca.reduction.modules.slice_store import slice_iter
from lsrpca.reduction.modules.slice_store import write_blocks


def _matrix(rows=10, cols=5):
    return np.arange(rows * cols, dtype=np.float32).reshape(rows, cols)


def test_partition_uses_ceiling_of_rows(tmp_path):
    store = partition(_matrix(), 4, tmp_path / "s")
    assert store.slice_row_counts == (4, 4, 2)
    assert store.storage_kind is StorageKind.DENSE
    assert [m.shape for _, m in slice_iter(store)] == [(4, 5), (4, 5), (2, 5)]


def test_partition_single_slice_yields_whole_matrix(tmp_path):
    x = _matrix()
    store = partition(x, 100, tmp_path / "s")
    slices = list(slice_iter(store))
    assert len(slices) == 1
    np.testing.assert_array_equal(slices[0][1], x)


def test_uneven_blocks_round_trip(tmp_path):
    x = _matrix()
    store = write_blocks(iter([x[:6], x[6:]]), tmp_path / "s", cols=5, kind=StorageKind.DENSE)
    assert store.slice_row_counts == (6, 4)
    np.testing.assert_array_equal(concatenate(store), x)


def test_sparse_round_trip_is_bit_exact(rng, tmp_path):
    x = as_sparse(sp.random(50, 8, density=0.2, random_state=rng, dtype=np.float32))
    store = partition(x, 7, tmp_path / "s")
    assert store.storage_kind is StorageKind.SPARSE
    assert store.n_slices == 8
    back = concatenate(store)
    assert sp.issparse(back)
    assert (back != x).nnz == 0


def test_partition_rejects_zero_rows_per_slice(tmp_path):
    with pytest.raises(PreconditionError):
        partition(_matrix(), 0, tmp_path / "s")


def test_every_slice_is_read_once_per_iteration(tmp_path):
    store = partition(_matrix(20, 3), 3, tmp_path / "s")
    list(slice_iter(store))
    assert store.read_log.reads_per_slice(store.n_slices) == [1] * store.n_slices
    assert store.read_log.bytes_read > 0


def test_open_store_reads_manifest(tmp_path):
    partition(_matrix(), 4, tmp_path / "s")
    store = open_store(tmp_path / "s")
    assert store.shape == (10, 5)
    assert store.max_slice_rows == 4


def test_checksum_mismatch_names_the_slice(tmp_path):
    store = partition(_matrix(), 4, tmp_path / "s")
    target = store.slice_path(1)
    payload = bytearray(target.read_bytes())
    payload[-1] ^= 0xFF
    target.write_bytes(bytes(payload))
    with pytest.raises(CorruptSliceError) as excinfo:
        list(slice_iter(store))
    assert excinfo.value.slice_index == 1


def test_missing_slice_file(tmp_path):
    store = partition(_matrix(), 4, tmp_path / "s")
    store.slice_path(2).unlink()
    with pytest.raises(SliceNotFoundError):
        concatenate(store)


def test_missing_manifest(tmp_path):
    with pytest.raises(SliceNotFoundError):
        open_store(tmp_path / "nowhere")


def test_empty_matrix_logs_its_single_slice(tmp_path, caplog):
    with caplog.at_level(logging.INFO, logger="lsrpca.reduction.modules.slice_store"):
        store = partition(np.zeros((0, 3), dtype=np.float32), 4, tmp_path / "s")
    assert store.slice_row_counts == (0,)
    assert "into 1 slices" in caplog.text


class TestOutputDirectory:
    def test_replaces_an_existing_store(self, tmp_path):
        partition(_matrix(), 4, tmp_path / "s")
        store = partition(_matrix(6, 2), 4, tmp_path / "s")
        assert open_store(tmp_path / "s").shape == (6, 2)
        assert sorted(p.name for p in store.path.iterdir()) == [MANIFEST_NAME, "slice_0000.bin", "slice_0001.bin"]

    def test_fills_an_empty_directory(self, tmp_path):
        (tmp_path / "s").mkdir()
        assert partition(_matrix(), 4, tmp_path / "s").n_slices == 3

    def test_refuses_a_directory_that_is_not_a_store(self, tmp_path):
        target = tmp_path / "thesis"
        target.mkdir()
        (target / "thesis.tex").write_text("\\chapter{One}")
        with pytest.raises(StorageError, match="refusing to replace"):
            partition(_matrix(), 4, target)
        assert (target / "thesis.tex").exists()
        assert [p.name for p in tmp_path.iterdir()] == ["thesis"]

    def test_refuses_a_file(self, tmp_path):
        (tmp_path / "s").write_text("data")
        with pytest.raises(StorageError):
            partition(_matrix(), 4, tmp_path / "s")

    def test_refuses_to_overwrite_its_source(self, tmp_path):
        store = partition(_matrix(), 4, tmp_path / "s")
        with pytest.raises(StorageError, match="is the input store"):
            select_rows(store, np.arange(5), tmp_path / "s", 4)
        np.testing.assert_array_equal(concatenate(open_store(tmp_path / "s")), _matrix())

    def test_failed_write_leaves_nothing_behind(self, tmp_path):
        with pytest.raises(RuntimeError):
            with SliceStoreWriter(tmp_path / "s", cols=5, kind=StorageKind.DENSE) as writer:
                writer.append(_matrix(4, 5))
                raise RuntimeError("interrupted")
        assert list(tmp_path.iterdir()) == []

    def test_failed_rewrite_keeps_the_old_store(self, tmp_path):
        partition(_matrix(), 4, tmp_path / "s")
        with pytest.raises(ShapeError):
            with SliceStoreWriter(tmp_path / "s", cols=5, kind=StorageKind.DENSE) as writer:
                writer.append(_matrix(4, 5))
                writer.append(_matrix(4, 3))
        np.testing.assert_array_equal(concatenate(open_store(tmp_path / "s")), _matrix())
        assert [p.name for p in tmp_path.iterdir()] == ["s"]


def test_inconsistent_manifest(tmp_path):
    partition(_matrix(), 4, tmp_path / "s")
    manifest_path = tmp_path / "s" / MANIFEST_NAME
    manifest = json.loads(manifest_path.read_text())
    manifest["n_total"] = 11
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(Exception, match="inconsistent"):
        open_store(tmp_path / "s")


def test_decode_rejects_bad_magic():
    payload = bytearray(encode_slice(np.ones((2, 2))))
    payload[:4] = b"XXXX"
    with pytest.raises(CorruptSliceError, match="magic"):
        decode_slice(bytes(payload))


def test_first_slice_requirement_names_kbar(tmp_path):
    store = partition(_matrix(), 4, tmp_path / "s")
    with pytest.raises(FirstSliceTooShortError, match="K̄=6"):
        store.require_first_slice_rows(6)
    store.require_first_slice_rows(4)


def test_select_rows_in_one_pass(tmp_path):
    x = _matrix(23, 4)
    store = partition(x, 5, tmp_path / "s")
    rows = np.array([0, 3, 4, 5, 11, 12, 13, 14, 22])
    selected = select_rows(store, rows, tmp_path / "sel", max_rows_per_slice=4)
    assert store.read_log.reads_per_slice(store.n_slices) == [1] * store.n_slices
    assert selected.slice_row_counts == (4, 4, 1)
    np.testing.assert_array_equal(concatenate(selected), x[rows])


def test_select_rows_sparse(rng, tmp_path):
    x = as_sparse(sp.random(30, 6, density=0.3, random_state=rng))
    store = partition(x, 7, tmp_path / "s")
    rows = np.arange(1, 30, 3)
    selected = select_rows(store, rows, tmp_path / "sel", max_rows_per_slice=4)
    assert selected.storage_kind is StorageKind.SPARSE
    np.testing.assert_array_equal(concatenate(selected).toarray(), x.toarray()[rows])


def test_select_rows_out_of_range(tmp_path):
    store = partition(_matrix(), 4, tmp_path / "s")
    with pytest.raises(ShapeError):
        select_rows(store, np.array([3, 10]), tmp_path / "sel", 4)


def test_labels_live_next_to_the_manifest(tmp_path):
    store = partition(_matrix(), 4, tmp_path / "s")
    assert load_labels(store) is None
    save_labels(store, np.arange(10) % 2)
    np.testing.assert_array_equal(load_labels(store), np.arange(10) % 2)
    with pytest.raises(ShapeError):
        save_labels(store, np.zeros(9))


@settings(max_examples=30, deadline=None)
@given(
    x=arrays(np.float32, st.tuples(st.integers(1, 30), st.integers(1, 6)), elements=st.floats(-100, 100, width=32)),
    max_rows=st.integers(1, 12),
    sparse=st.booleans(),
)
def test_partition_round_trip_property(x, max_rows, sparse):
    source = as_sparse(x) if sparse else x
    with tempfile.TemporaryDirectory() as workdir:
        store = partition(source, max_rows, Path(workdir) / "s")
        back = concatenate(store)
        dense_back = back.toarray() if sp.issparse(back) else back
    assert store.n_slices == -(-x.shape[0] // max_rows)
    np.testing.assert_array_equal(dense_back, x)
