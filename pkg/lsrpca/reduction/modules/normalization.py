"""
Column Normalization
====================

Column standardization used before fitting a projection and again after it
("renormalization").

- SPARSE mode standardizes only the nonzero values of continuous columns and
  leaves binary columns unchanged, so zeros stay zero.
- DENSE mode standardizes every entry of every column; the output is dense.
- NONE mode is the identity.

The divisor is two standard deviations (population estimator). Columns whose
standard deviation is 0 are flagged constant and map to 0 in both modes. SPARSE
mode keeps every stored entry, including values that become exactly 0, so nnz
and the pattern of the input are unchanged.
"""

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError
from .exceptions import ShapeError
from .exceptions import StorageError
from .instrumentation import log_phase
from .matrices import ACCUM_DTYPE
from .matrices import VALUE_DTYPE
from .matrices import Matrix
from .matrices import as_dense
from .matrices import as_sparse
from .slice_store import SliceStore
from .slice_store import SliceStoreWriter
from .slice_store import StorageKind
from .slice_store import load_labels
from .slice_store import save_labels
from .slice_store import slice_iter

logger = logging.getLogger(__name__)

NORM_FILE_NAME = "norm.json"
NORM_FORMAT_VERSION = 1


class NormMode(Enum):
    SPARSE = "sparse"
    DENSE = "dense"
    NONE = "none"


class ColumnKind(Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


INFER = "infer"


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-column statistics of one normalization fit."""

    mean: np.ndarray
    sd: np.ndarray
    mode: NormMode
    binary: np.ndarray

    @property
    def cols(self) -> int:
        return int(self.mean.shape[0])

    @property
    def constant(self) -> np.ndarray:
        return self.sd == 0

    @property
    def column_kinds(self) -> list[ColumnKind]:
        return [ColumnKind.BINARY if b else ColumnKind.CONTINUOUS for b in self.binary]

    @property
    def passthrough(self) -> np.ndarray:
        """Columns the transform leaves untouched."""
        if self.mode is NormMode.NONE:
            return np.ones(self.cols, dtype=bool)
        if self.mode is NormMode.SPARSE:
            return self.binary.copy()
        return np.zeros(self.cols, dtype=bool)

    def scale(self) -> np.ndarray:
        """Reciprocal of the divisor 2·sd, with 0 for constant columns."""
        scale = np.zeros(self.cols, dtype=ACCUM_DTYPE)
        np.divide(1.0, 2.0 * self.sd, out=scale, where=self.sd > 0)
        return scale

    def to_dict(self) -> dict:
        return {
            "format_version": NORM_FORMAT_VERSION,
            "mode": self.mode.value,
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "column_kind": [kind.value for kind in self.column_kinds],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NormStats":
        mean = np.asarray(payload["mean"], dtype=ACCUM_DTYPE)
        sd = np.asarray(payload["sd"], dtype=ACCUM_DTYPE)
        kinds = payload["column_kind"]
        if not (mean.shape == sd.shape == (len(kinds),)):
            raise ShapeError("Normalization statistics disagree on column count", mean.shape, sd.shape)
        if np.any(sd < 0):
            raise StorageError("Normalization statistics hold a negative standard deviation")
        return cls(
            mean=mean,
            sd=sd,
            mode=NormMode(payload["mode"]),
            binary=np.asarray([ColumnKind(k) is ColumnKind.BINARY for k in kinds], dtype=bool),
        )

    @classmethod
    def identity(cls, cols: int) -> "NormStats":
        return cls(
            mean=np.zeros(cols, dtype=ACCUM_DTYPE),
            sd=np.full(cols, 0.5, dtype=ACCUM_DTYPE),
            mode=NormMode.NONE,
            binary=np.zeros(cols, dtype=bool),
        )


# ------------------------------------------------------------------------------
# Fitting
# ------------------------------------------------------------------------------


class _ColumnMoments:
    """Streaming per-column count, mean and centered sum of squares."""

    def __init__(self, cols: int, over_nonzeros: bool):
        self.cols = cols
        self.over_nonzeros = over_nonzeros
        self.count = np.zeros(cols, dtype=ACCUM_DTYPE)
        self.mean = np.zeros(cols, dtype=ACCUM_DTYPE)
        self.m2 = np.zeros(cols, dtype=ACCUM_DTYPE)
        self.all_ones = np.ones(cols, dtype=bool)

    def update(self, block: Matrix) -> None:
        if block.shape[1] != self.cols:
            raise ShapeError("Block column count differs from the statistics", block.shape, (self.cols,))
        rows = block.shape[0]
        if sp.issparse(block):
            csc = block if sp.isspmatrix_csc(block) else as_sparse(block)
            column = np.repeat(np.arange(self.cols), np.diff(csc.indptr))
            data = np.asarray(csc.data, dtype=ACCUM_DTYPE)
            # Stored zeros count as zeros
            per_column = np.bincount(column, weights=(data != 0), minlength=self.cols)
            sums = np.bincount(column, weights=data, minlength=self.cols)
            squares = np.bincount(column, weights=data * data, minlength=self.cols)
            self.all_ones &= np.bincount(column, weights=(data != 0) & (data != 1.0), minlength=self.cols) == 0
        else:
            dense = np.asarray(block, dtype=ACCUM_DTYPE)
            nonzero = dense != 0
            per_column = nonzero.sum(axis=0)
            self.all_ones &= np.all(~nonzero | (dense == 1.0), axis=0)
            if self.over_nonzeros:
                masked = np.where(nonzero, dense, 0.0)
                sums = masked.sum(axis=0)
                squares = (masked * masked).sum(axis=0)
            else:
                sums = dense.sum(axis=0)
                squares = (dense * dense).sum(axis=0)
        n = per_column.astype(ACCUM_DTYPE) if self.over_nonzeros else np.full(self.cols, float(rows))
        block_mean = np.zeros(self.cols, dtype=ACCUM_DTYPE)
        np.divide(sums, n, out=block_mean, where=n > 0)
        block_m2 = np.maximum(squares - block_mean * sums, 0.0)
        self._merge(n, block_mean, block_m2)

    def _merge(self, n: np.ndarray, block_mean: np.ndarray, block_m2: np.ndarray) -> None:
        total = self.count + n
        weight = np.zeros(self.cols, dtype=ACCUM_DTYPE)
        np.divide(n, total, out=weight, where=total > 0)
        delta = block_mean - self.mean
        self.mean += delta * weight
        self.m2 += block_m2 + delta * delta * self.count * weight
        self.count = total

    def finish(self) -> tuple[np.ndarray, np.ndarray]:
        variance = np.zeros(self.cols, dtype=ACCUM_DTYPE)
        np.divide(self.m2, self.count, out=variance, where=self.count > 0)
        sd = np.sqrt(variance)
        # Round-off on constant columns
        sd[sd <= 1e-12 * np.maximum(np.abs(self.mean), 1.0)] = 0.0
        return np.where(self.count > 0, self.mean, 0.0), sd


def _resolve_kinds(column_kinds, cols: int, inferred: np.ndarray) -> np.ndarray:
    if column_kinds is None:
        return np.zeros(cols, dtype=bool)
    if isinstance(column_kinds, str):
        if column_kinds != INFER:
            raise ConfigError(f"Unknown column kind mode {column_kinds!r}; expected {INFER!r} or a list")
        return inferred.copy()
    if len(column_kinds) != cols:
        raise ShapeError("column_kinds must hold one entry per column", (len(column_kinds),), (cols,))
    return np.asarray([ColumnKind(k) is ColumnKind.BINARY for k in column_kinds], dtype=bool)


def _stats_from(moments: _ColumnMoments, mode: NormMode, column_kinds) -> NormStats:
    mean, sd = moments.finish()
    stats = NormStats(mean=mean, sd=sd, mode=mode, binary=_resolve_kinds(column_kinds, moments.cols, moments.all_ones))
    flagged = stats.constant if mode is NormMode.DENSE else stats.constant & ~stats.binary
    n_constant = int(np.count_nonzero(flagged))
    if n_constant:
        logger.warning(f"{n_constant} of {stats.cols} columns are constant under {mode.value} normalization")
    return stats


def fit_norm(
    store: SliceStore,
    mode: NormMode | str = NormMode.SPARSE,
    column_kinds: Sequence[ColumnKind | str] | str | None = None,
) -> NormStats:
    """
    Fit normalization statistics in a single streaming pass.

    Args:
        store: Source slice store
        mode: SPARSE (statistics over nonzeros) or DENSE (over all entries)
        column_kinds: One kind per column, ``"infer"`` to mark a column binary
            when every nonzero equals 1, or None for all continuous

    Returns:
        NormStats with population standard deviations
    """
    mode = NormMode(mode)
    if mode is NormMode.NONE:
        return NormStats.identity(store.cols)
    moments = _ColumnMoments(store.cols, over_nonzeros=mode is NormMode.SPARSE)
    with log_phase("normalize-fit", store.read_log):
        for _, block in slice_iter(store):
            moments.update(block)
    return _stats_from(moments, mode, column_kinds)


def fit_norm_array(x: Matrix, mode: NormMode | str = NormMode.DENSE, column_kinds=None) -> NormStats:
    """In-core counterpart of ``fit_norm``."""
    mode = NormMode(mode)
    if mode is NormMode.NONE:
        return NormStats.identity(x.shape[1])
    moments = _ColumnMoments(x.shape[1], over_nonzeros=mode is NormMode.SPARSE)
    moments.update(x)
    return _stats_from(moments, mode, column_kinds)


# ------------------------------------------------------------------------------
# Applying
# ------------------------------------------------------------------------------


def apply_norm_array(x: Matrix, stats: NormStats) -> Matrix:
    """
    Transform one in-core block with fitted statistics.

    SPARSE mode keeps the storage type and the zero pattern of ``x``; DENSE
    mode always returns a dense matrix.
    """
    if x.shape[1] != stats.cols:
        raise ShapeError("Statistics do not match the matrix column count", x.shape, (stats.cols,))
    if stats.mode is NormMode.NONE:
        return x
    scale = stats.scale()
    active = ~stats.passthrough
    if stats.mode is NormMode.SPARSE:
        if sp.issparse(x):
            out = as_sparse(x, keep_zeros=True)
            column = np.repeat(np.arange(stats.cols), np.diff(out.indptr))
            hit = active[column] & (out.data != 0)
            data = out.data.astype(ACCUM_DTYPE)
            data[hit] = (data[hit] - stats.mean[column[hit]]) * scale[column[hit]]
            out.data = data.astype(VALUE_DTYPE)
            return out
        dense = np.asarray(x, dtype=ACCUM_DTYPE)
        transformed = (dense - stats.mean) * scale
        keep = (dense == 0) | ~active
        return as_dense(np.where(keep, dense, transformed))
    dense = x.toarray() if sp.issparse(x) else x
    return as_dense((np.asarray(dense, dtype=ACCUM_DTYPE) - stats.mean) * scale)


def apply_norm(store: SliceStore, stats: NormStats, path: Path | str) -> SliceStore:
    """
    Write the normalized copy of ``store`` slice by slice.

    The output keeps the slice boundaries of the input. Labels stored with
    the input are carried over.

    Raises:
        ShapeError: If the statistics were fitted on a different column count
    """
    if stats.cols != store.cols:
        raise ShapeError("Statistics do not match the store column count", (stats.cols,), store.shape)
    dense_out = stats.mode is NormMode.DENSE or store.storage_kind is StorageKind.DENSE
    kind = StorageKind.DENSE if dense_out else StorageKind.SPARSE
    with log_phase("normalize-apply", store.read_log):
        with SliceStoreWriter(path, cols=store.cols, kind=kind, source=store) as writer:
            for _, block in slice_iter(store):
                writer.append(apply_norm_array(block, stats))
        out = writer.close()
    labels = load_labels(store)
    if labels is not None:
        save_labels(out, labels)
    return out


def renormalize(train: np.ndarray, *others: np.ndarray) -> tuple[NormStats, list[np.ndarray]]:
    """
    Dense-mode standardization fitted on ``train`` and applied to every block.

    Used after projection, whose outputs are dense linear combinations that
    no longer carry the input scaling.
    """
    stats = fit_norm_array(train, NormMode.DENSE)
    return stats, [apply_norm_array(block, stats) for block in (train, *others)]


# ------------------------------------------------------------------------------
# Persistence
# ------------------------------------------------------------------------------


def save_norm(stats: NormStats, directory: Path | str) -> Path:
    target = Path(directory) / NORM_FILE_NAME
    try:
        target.write_text(json.dumps(stats.to_dict(), indent=2))
    except OSError as e:
        raise StorageError(f"Failed to write {target}: {e}") from e
    return target


def load_norm(path: Path | str) -> NormStats:
    """Load statistics from a ``norm.json`` file or a store directory holding one."""
    path = Path(path)
    if path.is_dir():
        path = path / NORM_FILE_NAME
    try:
        return NormStats.from_dict(json.loads(path.read_text()))
    except FileNotFoundError as e:
        raise StorageError(f"No normalization statistics at {path}") from e
    except (OSError, ValueError, KeyError) as e:
        raise StorageError(f"Unreadable normalization statistics {path}: {e}") from e
