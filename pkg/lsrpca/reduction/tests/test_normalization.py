import numpy as np
import pytest
import scipy.sparse as sp

from lsrpca.reduction.modules.exceptions import ConfigError
from lsrpca.reduction.modules.exceptions import ShapeError
from lsrpca.reduction.modules.exceptions import StorageError
from lsrpca.reduction.modules.matrices import as_sparse
from lsrpca.reduction.modules.normalization import INFER
from lsrpca.reduction.modules.normalization import ColumnKind
from lsrpca.reduction.modules.normalization import NormMode
from lsrpca.reduction.modules.normalization import NormStats
from lsrpca.reduction.modules.normalization import apply_norm
from lsrpca.reduction.modules.normalization import apply_norm_array
from lsrpca.reduction.modules.normalization import fit_norm
from lsrpca.reduction.modules.normalization import fit_norm_array
from lsrpca.reduction.modules.normalization import load_norm
from lsrpca.reduction.modules.normalization import renormalize
from lsrpca.reduction.modules.normalization import save_norm
from lsrpca.reduction.modules.slice_store import StorageKind
from lsrpca.reduction.modules.slice_store import concatenate
from lsrpca.reduction.modules.slice_store import load_labels
from lsrpca.reduction.modules.slice_store import partition
from lsrpca.reduction.modules.slice_store import save_labels

# continuous, binary, constant-over-nonzeros
MIXED = np.array(
    [
        [2.0, 1.0, 5.0],
        [0.0, 0.0, 0.0],
        [4.0, 1.0, 5.0],
        [0.0, 1.0, 0.0],
    ],
)
MIXED_SPARSE_NORMALIZED = np.array(
    [
        [-0.5, 1.0, 0.0],
        [0.0, 0.0, 0.0],
        [0.5, 1.0, 0.0],
        [0.0, 1.0, 0.0],
    ],
)


def test_dense_mode_centers_and_scales_by_two_sd(dense_matrix):
    stats = fit_norm_array(dense_matrix, NormMode.DENSE)
    out = apply_norm_array(dense_matrix, stats)
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-5)
    np.testing.assert_allclose(out.std(axis=0), 0.5, atol=1e-5)


def test_dense_mode_maps_constant_column_to_zero():
    x = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    stats = fit_norm_array(x, NormMode.DENSE)
    assert stats.constant.tolist() == [False, True]
    np.testing.assert_array_equal(apply_norm_array(x, stats)[:, 1], 0.0)


def test_dense_mode_densifies_sparse_input():
    out = apply_norm_array(as_sparse(MIXED), fit_norm_array(as_sparse(MIXED), NormMode.DENSE))
    assert not sp.issparse(out)


@pytest.mark.parametrize("sparse_input", [False, True])
def test_sparse_mode_touches_only_continuous_nonzeros(sparse_input):
    x = as_sparse(MIXED) if sparse_input else MIXED
    stats = fit_norm_array(x, NormMode.SPARSE, INFER)
    assert stats.column_kinds == [ColumnKind.CONTINUOUS, ColumnKind.BINARY, ColumnKind.CONTINUOUS]
    np.testing.assert_allclose(stats.mean[0], 3.0)
    np.testing.assert_allclose(stats.sd[0], 1.0)
    out = apply_norm_array(x, stats)
    assert sp.issparse(out) == sparse_input
    dense_out = out.toarray() if sparse_input else out
    np.testing.assert_allclose(dense_out, MIXED_SPARSE_NORMALIZED)


def _assert_same_pattern(out, x):
    assert out.nnz == x.nnz
    np.testing.assert_array_equal(out.indptr, x.indptr)
    np.testing.assert_array_equal(out.indices, x.indices)


def test_sparse_mode_keeps_zero_pattern(rng):
    x = as_sparse(sp.random(30, 5, density=0.3, random_state=rng) * 10)
    out = apply_norm_array(x, fit_norm_array(x, NormMode.SPARSE))
    _assert_same_pattern(out, x)


def test_sparse_mode_stores_centered_and_constant_zeros():
    x = as_sparse(np.array([[1.0, 5.0], [2.0, 0.0], [3.0, 5.0], [0.0, 5.0]]))
    stats = fit_norm_array(x, NormMode.SPARSE)
    assert stats.constant.tolist() == [False, True]
    out = apply_norm_array(x, stats)
    _assert_same_pattern(out, x)
    half = 0.5 / np.sqrt(2.0 / 3.0)
    np.testing.assert_allclose(out.data, [-half, 0.0, half, 0.0, 0.0, 0.0], atol=1e-6)


def test_sparse_store_keeps_pattern_on_disk(tmp_path):
    x = as_sparse(np.array([[1.0, 5.0], [2.0, 0.0], [3.0, 5.0], [0.0, 5.0]]))
    store = partition(x, 3, tmp_path / "raw")
    out = apply_norm(store, fit_norm(store, NormMode.SPARSE), tmp_path / "norm")
    assert out.storage_kind is StorageKind.SPARSE
    _assert_same_pattern(concatenate(out), x)


def test_explicit_column_kinds():
    stats = fit_norm_array(MIXED, NormMode.SPARSE, ["binary", "continuous", "continuous"])
    assert stats.binary.tolist() == [True, False, False]
    with pytest.raises(ShapeError):
        fit_norm_array(MIXED, NormMode.SPARSE, ["binary"])
    with pytest.raises(ConfigError):
        fit_norm_array(MIXED, NormMode.SPARSE, "guess")


def test_none_mode_is_identity(dense_matrix):
    stats = fit_norm_array(dense_matrix, NormMode.NONE)
    assert apply_norm_array(dense_matrix, stats) is dense_matrix


@pytest.mark.parametrize("mode", [NormMode.DENSE, NormMode.SPARSE])
def test_streaming_fit_matches_in_core_fit(mode, rng, tmp_path):
    x = as_sparse(sp.random(57, 6, density=0.4, random_state=rng) * 3)
    in_core = fit_norm_array(x, mode)
    for rows in (5, 19, 57):
        streamed = fit_norm(partition(x, rows, tmp_path / f"s{rows}"), mode)
        np.testing.assert_allclose(streamed.mean, in_core.mean, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(streamed.sd, in_core.sd, rtol=1e-9, atol=1e-12)


def test_apply_norm_keeps_slice_boundaries_and_labels(small_store, dense_matrix, tmp_path):
    labels = np.arange(small_store.n_total) % 2
    save_labels(small_store, labels)
    stats = fit_norm(small_store, NormMode.DENSE)
    out = apply_norm(small_store, stats, tmp_path / "norm")
    assert out.slice_row_counts == small_store.slice_row_counts
    assert out.storage_kind is StorageKind.DENSE
    np.testing.assert_array_equal(load_labels(out), labels)
    np.testing.assert_allclose(concatenate(out), apply_norm_array(dense_matrix, stats), atol=1e-6)


def test_apply_norm_rejects_foreign_statistics(small_store, tmp_path):
    with pytest.raises(ShapeError):
        apply_norm(small_store, NormStats.identity(3), tmp_path / "norm")


def test_renormalize_uses_training_statistics(rng):
    train = rng.standard_normal((50, 3)) * 4 + 2
    test = rng.standard_normal((20, 3))
    stats, (train_out, test_out) = renormalize(train, test)
    np.testing.assert_allclose(train_out.std(axis=0), 0.5, atol=1e-5)
    np.testing.assert_allclose(test_out, (test - stats.mean) / (2 * stats.sd), atol=1e-5)


def test_stats_save_and_load(tmp_path):
    stats = fit_norm_array(MIXED, NormMode.SPARSE, INFER)
    target = save_norm(stats, tmp_path)
    for source in (target, tmp_path):
        loaded = load_norm(source)
        assert loaded.mode is NormMode.SPARSE
        np.testing.assert_array_equal(loaded.mean, stats.mean)
        np.testing.assert_array_equal(loaded.binary, stats.binary)


def test_load_norm_missing(tmp_path):
    with pytest.raises(StorageError, match="No normalization statistics"):
        load_norm(tmp_path)
