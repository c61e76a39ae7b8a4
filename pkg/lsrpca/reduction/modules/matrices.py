"""
Matrix Core
===========

In-core matrix representations shared by every algorithm in the toolkit.

- ``DenseMatrix`` is a column-major (Fortran ordered) ``numpy.ndarray`` of
  32-bit floats.
- ``SparseColMatrix`` is a ``scipy.sparse.csc_matrix`` with 32-bit float values
  and 64-bit index arrays, kept in canonical form (sorted unique row indices
  per column). Stored zeros are dropped on conversion; sparse-mode
  normalization keeps the ones it produces so the pattern survives.

Products are accumulated in 64-bit floats and cast back to the storage type
unless the caller asks for the accumulation type.
"""

from typing import TypeAlias

import numpy as np
import scipy.sparse as sp

from .exceptions import PreconditionError
from .exceptions import ShapeError

VALUE_DTYPE = np.float32
INDEX_DTYPE = np.int64
ACCUM_DTYPE = np.float64

DenseMatrix: TypeAlias = np.ndarray
SparseColMatrix: TypeAlias = sp.csc_matrix
Matrix: TypeAlias = DenseMatrix | SparseColMatrix


def as_dense(x, dtype=VALUE_DTYPE) -> DenseMatrix:
    """
    Convert ``x`` to a validated column-major dense matrix.

    Raises:
        ShapeError: If ``x`` is not two-dimensional
        PreconditionError: If ``x`` holds NaN or infinite entries
    """
    arr = x.toarray() if sp.issparse(x) else np.asarray(x)
    if arr.ndim != 2:
        raise ShapeError("Expected a two-dimensional matrix", arr.shape)
    arr = np.asfortranarray(arr, dtype=dtype)
    if not np.isfinite(arr).all():
        raise PreconditionError("Matrix contains NaN or infinite entries")
    return arr


def as_sparse(x, *, keep_zeros: bool = False) -> SparseColMatrix:
    """
    Convert ``x`` to a canonical compressed-sparse-column matrix.

    Duplicates are summed, explicit zeros dropped, row indices sorted within
    each column and index arrays widened to 64 bits.

    With ``keep_zeros`` the stored entries of a sparse ``x`` are kept even
    when their value is 0, so a transformed matrix keeps its pattern.
    """
    if sp.issparse(x):
        csc = sp.csc_matrix(x, dtype=VALUE_DTYPE, copy=True)
    else:
        csc = sp.csc_matrix(as_dense(x))
    csc.sum_duplicates()
    if not keep_zeros:
        csc.eliminate_zeros()
    csc.sort_indices()
    if not np.isfinite(csc.data).all():
        raise PreconditionError("Matrix contains NaN or infinite entries")
    csc.indices = csc.indices.astype(INDEX_DTYPE, copy=False)
    csc.indptr = csc.indptr.astype(INDEX_DTYPE, copy=False)
    return csc


def is_canonical(x: SparseColMatrix) -> bool:
    """Check the canonical-form invariants of a sparse column matrix."""
    indptr = np.asarray(x.indptr)
    indices = np.asarray(x.indices)
    if indptr[0] != 0 or indptr[-1] != x.nnz or len(indices) != x.nnz:
        return False
    if np.any(np.diff(indptr) < 0):
        return False
    if x.nnz and (indices.min() < 0 or indices.max() >= x.shape[0]):
        return False
    if np.any(x.data == 0):
        return False
    for j in range(x.shape[1]):
        column = indices[indptr[j]:indptr[j + 1]]
        if np.any(np.diff(column) <= 0):
            return False
    return True


def nbytes(x: Matrix) -> int:
    """Bytes held by the arrays backing ``x``."""
    if sp.issparse(x):
        return int(x.data.nbytes + x.indices.nbytes + x.indptr.nbytes)
    return int(np.asarray(x).nbytes)


def _check_inner(a_shape, b_shape, inner_a: int, inner_b: int, operation: str) -> None:
    if inner_a != inner_b:
        raise ShapeError(f"Inner dimensions do not agree for {operation}", tuple(a_shape), tuple(b_shape))


def _finish(result, dtype) -> DenseMatrix:
    if sp.issparse(result):
        result = result.toarray()
    return np.asfortranarray(np.asarray(result), dtype=dtype)


def _operands(a, b):
    if sp.issparse(a) and sp.issparse(b):
        raise PreconditionError("Sparse x sparse products are not supported")
    a = a.astype(ACCUM_DTYPE) if sp.issparse(a) else np.asarray(a, dtype=ACCUM_DTYPE)
    b = b.astype(ACCUM_DTYPE) if sp.issparse(b) else np.asarray(b, dtype=ACCUM_DTYPE)
    return a, b


def matmul(a: Matrix, b: Matrix, dtype=VALUE_DTYPE) -> DenseMatrix:
    """
    Compute ``a @ b`` for any dense/sparse operand combination but sparse x sparse.

    Sparse left operands are multiplied column by column over their nonzeros,
    so the cost is proportional to ``nnz(a) * cols(b)``.

    Args:
        a: Left operand (M x N)
        b: Right operand (N x P)
        dtype: Result element type; pass ``ACCUM_DTYPE`` to keep 64-bit values

    Raises:
        ShapeError: If the inner dimensions differ
    """
    _check_inner(a.shape, b.shape, a.shape[1], b.shape[0], "matmul")
    a, b = _operands(a, b)
    return _finish(a @ b, dtype)


def transpose_matmul(a: Matrix, b: Matrix, dtype=VALUE_DTYPE) -> DenseMatrix:
    """
    Compute ``a.T @ b`` without materialising the transpose of a dense operand.

    Raises:
        ShapeError: If the row counts of ``a`` and ``b`` differ
    """
    _check_inner(a.shape, b.shape, a.shape[0], b.shape[0], "transpose_matmul")
    a, b = _operands(a, b)
    if sp.issparse(b):
        return _finish((b.T @ a).T, dtype)
    return _finish(a.T @ b, dtype)


def stack_rows(parts: list[Matrix]) -> Matrix:
    """Vertically concatenate matrices; all-sparse input stays sparse."""
    if not parts:
        raise ShapeError("Nothing to concatenate")
    cols = {p.shape[1] for p in parts}
    if len(cols) != 1:
        raise ShapeError("Row blocks disagree on column count", *(p.shape for p in parts))
    if all(sp.issparse(p) for p in parts):
        return as_sparse(sp.vstack(parts, format="csc"), keep_zeros=True)
    return np.asfortranarray(np.vstack([p.toarray() if sp.issparse(p) else np.asarray(p) for p in parts]))
