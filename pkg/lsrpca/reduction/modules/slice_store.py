"""
Slice Store
===========

On-disk horizontal partition of an N x P matrix into S row slices. This is the
only representation of the data that the streaming algorithms touch.

Directory layout::

    <store>/manifest.json     slice counts, shapes, kind, checksums
    <store>/slice_0000.bin    first slice
    <store>/slice_0001.bin    ...
    <store>/labels.npy        optional class labels (one per row)
    <store>/norm.json         optional normalization statistics

Slice file format (little-endian)::

    magic  b"LSRS"   4 bytes
    version          uint16
    kind             uint8   (0 dense, 1 sparse)
    reserved         uint8
    rows, cols, nnz  uint64 x 3
    dense:  rows*cols float32 values, column-major
    sparse: (cols+1) int64 col_ptr, nnz int64 row_idx, nnz float32 values

The manifest keeps a SHA-256 digest of every slice file; reads verify it.
"""

import hashlib
import json
import logging
import shutil
import struct
import tempfile
from collections.abc import Iterator
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import CorruptSliceError
from .exceptions import FirstSliceTooShortError
from .exceptions import PreconditionError
from .exceptions import ShapeError
from .exceptions import SliceNotFoundError
from .exceptions import StorageError
from .instrumentation import ReadLog
from .matrices import INDEX_DTYPE
from .matrices import VALUE_DTYPE
from .matrices import Matrix
from .matrices import as_dense
from .matrices import as_sparse
from .matrices import stack_rows

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
LABELS_NAME = "labels.npy"
SLICE_MAGIC = b"LSRS"
SLICE_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBBQQQ")


class StorageKind(Enum):
    """Storage kind of every slice in a store."""

    DENSE = "dense"
    SPARSE = "sparse"


_KIND_CODES = {StorageKind.DENSE: 0, StorageKind.SPARSE: 1}
_CODE_KINDS = {code: kind for kind, code in _KIND_CODES.items()}


@dataclass(frozen=True)
class SliceStore:
    """Handle on a slice store directory; values stay on disk."""

    path: Path
    n_total: int
    cols: int
    slice_row_counts: tuple[int, ...]
    storage_kind: StorageKind
    checksums: tuple[str, ...]
    read_log: ReadLog = field(default_factory=ReadLog, compare=False, repr=False)

    @property
    def n_slices(self) -> int:
        return len(self.slice_row_counts)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_total, self.cols)

    @property
    def max_slice_rows(self) -> int:
        return max(self.slice_row_counts, default=0)

    def slice_path(self, index: int) -> Path:
        return self.path / f"slice_{index:04d}.bin"

    def require_first_slice_rows(self, kbar: int) -> None:
        """Check the first slice is tall enough for a K̄-column sketch."""
        first = self.slice_row_counts[0] if self.slice_row_counts else 0
        if first < kbar:
            raise FirstSliceTooShortError(first, kbar)


# ------------------------------------------------------------------------------
# Slice file codec
# ------------------------------------------------------------------------------


def encode_slice(x: Matrix) -> bytes:
    """Serialise one slice to the binary slice format."""
    if sp.issparse(x):
        x = as_sparse(x, keep_zeros=True)
        header = _HEADER.pack(
            SLICE_MAGIC, SLICE_FORMAT_VERSION, _KIND_CODES[StorageKind.SPARSE], 0,
            x.shape[0], x.shape[1], x.nnz,
        )
        return b"".join([
            header,
            np.ascontiguousarray(x.indptr, dtype="<i8").tobytes(),
            np.ascontiguousarray(x.indices, dtype="<i8").tobytes(),
            np.ascontiguousarray(x.data, dtype="<f4").tobytes(),
        ])
    x = as_dense(x)
    header = _HEADER.pack(
        SLICE_MAGIC, SLICE_FORMAT_VERSION, _KIND_CODES[StorageKind.DENSE], 0,
        x.shape[0], x.shape[1], x.size,
    )
    return header + np.asarray(x, dtype="<f4").tobytes(order="F")


def decode_slice(payload: bytes, slice_index: int = 0) -> Matrix:
    """
    Parse a slice from its binary form without copying the value arrays.

    Raises:
        CorruptSliceError: If the header or payload length is inconsistent
    """
    if len(payload) < _HEADER.size:
        raise CorruptSliceError(slice_index, "truncated header")
    magic, version, kind_code, _, rows, cols, nnz = _HEADER.unpack_from(payload)
    if magic != SLICE_MAGIC:
        raise CorruptSliceError(slice_index, f"bad magic {magic!r}")
    if version != SLICE_FORMAT_VERSION:
        raise CorruptSliceError(slice_index, f"unsupported format version {version}")
    kind = _CODE_KINDS.get(kind_code)
    body = memoryview(payload)[_HEADER.size:]
    if kind is StorageKind.DENSE:
        if nnz != rows * cols or len(body) != 4 * rows * cols:
            raise CorruptSliceError(slice_index, "dense payload length mismatch")
        values = np.frombuffer(body, dtype="<f4")
        return values.reshape((rows, cols), order="F")
    if kind is StorageKind.SPARSE:
        expected = 8 * (cols + 1) + 8 * nnz + 4 * nnz
        if len(body) != expected:
            raise CorruptSliceError(slice_index, "sparse payload length mismatch")
        indptr = np.frombuffer(body, dtype="<i8", count=cols + 1)
        indices = np.frombuffer(body, dtype="<i8", count=nnz, offset=8 * (cols + 1))
        data = np.frombuffer(body, dtype="<f4", count=nnz, offset=8 * (cols + 1 + nnz))
        return sp.csc_matrix((data, indices, indptr), shape=(rows, cols))
    raise CorruptSliceError(slice_index, f"unknown storage kind code {kind_code}")


# ------------------------------------------------------------------------------
# Writing
# ------------------------------------------------------------------------------


def _check_replaceable(path: Path) -> None:
    """Allow only a missing path, an empty directory or an existing store."""
    if not path.exists():
        return
    if not path.is_dir():
        raise StorageError(f"{path} exists and is not a directory; refusing to write a slice store there")
    if (path / MANIFEST_NAME).exists() or not any(path.iterdir()):
        return
    raise StorageError(f"{path} is a non-empty directory without {MANIFEST_NAME}; refusing to replace it")


class SliceStoreWriter:
    """
    Append row blocks to a new slice store and seal it with a manifest.

    Slices go to a hidden sibling directory that is renamed onto ``path``
    when the store is sealed, so an interrupted write never leaves a
    half-written store behind. An existing store at ``path`` is replaced;
    any other non-empty directory is refused.

    Usage:
        with SliceStoreWriter(path, cols=5, kind=StorageKind.DENSE, source=input_store) as writer:
            writer.append(block)
        store = writer.store

    Raises:
        StorageError: If ``path`` is the ``source`` store, or holds something other than a store
    """

    def __init__(self, path: Path | str, cols: int, kind: StorageKind, *, source: SliceStore | None = None):
        self.path = Path(path)
        self.cols = cols
        self.kind = kind
        self.row_counts: list[int] = []
        self.checksums: list[str] = []
        self.store: SliceStore | None = None
        if source is not None and self.path.resolve() == source.path.resolve():
            raise StorageError(f"Output store {self.path} is the input store; choose another directory")
        _check_replaceable(self.path)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.staging = Path(tempfile.mkdtemp(prefix=f".{self.path.name}.", suffix=".partial", dir=self.path.parent))
        except OSError as e:
            raise StorageError(f"Cannot create slice store at {self.path}: {e}") from e

    def __enter__(self) -> "SliceStoreWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self.discard()

    def discard(self) -> None:
        """Drop the staged slices of an unfinished store."""
        if self.store is None:
            shutil.rmtree(self.staging, ignore_errors=True)

    def append(self, block: Matrix) -> None:
        if block.shape[1] != self.cols:
            raise ShapeError("Slice column count does not match the store", block.shape, (block.shape[0], self.cols))
        block = as_sparse(block, keep_zeros=True) if self.kind is StorageKind.SPARSE else as_dense(block)
        payload = encode_slice(block)
        target = self.staging / f"slice_{len(self.row_counts):04d}.bin"
        try:
            target.write_bytes(payload)
        except OSError as e:
            raise StorageError(f"Failed to write {target}: {e}") from e
        self.row_counts.append(int(block.shape[0]))
        self.checksums.append(hashlib.sha256(payload).hexdigest())

    def close(self) -> SliceStore:
        if self.store is not None:
            return self.store
        manifest = {
            "format_version": SLICE_FORMAT_VERSION,
            "n_total": sum(self.row_counts),
            "cols": self.cols,
            "storage_kind": self.kind.value,
            "slice_row_counts": self.row_counts,
            "checksums": self.checksums,
        }
        try:
            (self.staging / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
            _check_replaceable(self.path)
            if self.path.exists():
                shutil.rmtree(self.path)
            self.staging.rename(self.path)
        except OSError as e:
            self.discard()
            raise StorageError(f"Failed to seal slice store {self.path}: {e}") from e
        except StorageError:
            self.discard()
            raise
        self.store = SliceStore(
            path=self.path,
            n_total=manifest["n_total"],
            cols=self.cols,
            slice_row_counts=tuple(self.row_counts),
            storage_kind=self.kind,
            checksums=tuple(self.checksums),
        )
        logger.debug(f"Sealed slice store {self.path}: {self.store.n_slices} slices, {self.store.n_total} rows")
        return self.store


def partition(x: Matrix, max_rows_per_slice: int, path: Path | str) -> SliceStore:
    """
    Split ``x`` into ceil(N / max_rows_per_slice) row slices on disk.

    Sparse input produces a sparse store, dense input a dense store.

    Raises:
        PreconditionError: If ``max_rows_per_slice`` < 1
        StorageError: If a slice or the manifest cannot be written
    """
    if max_rows_per_slice < 1:
        raise PreconditionError(f"max_rows_per_slice must be >= 1, got {max_rows_per_slice}")
    kind = StorageKind.SPARSE if sp.issparse(x) else StorageKind.DENSE
    x = as_sparse(x).tocsr() if kind is StorageKind.SPARSE else as_dense(x)
    n = x.shape[0]
    with SliceStoreWriter(path, cols=x.shape[1], kind=kind) as writer:
        for start in range(0, max(n, 1), max_rows_per_slice):
            writer.append(x[start:start + max_rows_per_slice])
    store = writer.close()
    logger.info(f"Partitioned {n}x{x.shape[1]} {kind.value} matrix into {store.n_slices} slices")
    return store


# ------------------------------------------------------------------------------
# Reading
# ------------------------------------------------------------------------------


def open_store(path: Path | str) -> SliceStore:
    """
    Open an existing slice store from its manifest.

    Raises:
        SliceNotFoundError: If the manifest is missing
        StorageError: If the manifest is unreadable or inconsistent
    """
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise SliceNotFoundError(f"No slice store manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
        store = SliceStore(
            path=path,
            n_total=int(manifest["n_total"]),
            cols=int(manifest["cols"]),
            slice_row_counts=tuple(int(r) for r in manifest["slice_row_counts"]),
            storage_kind=StorageKind(manifest["storage_kind"]),
            checksums=tuple(manifest["checksums"]),
        )
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise StorageError(f"Unreadable manifest {manifest_path}: {e}") from e
    if sum(store.slice_row_counts) != store.n_total or len(store.checksums) != store.n_slices:
        raise StorageError(f"Manifest {manifest_path} is inconsistent with its slice list")
    return store


def read_slice(store: SliceStore, index: int) -> Matrix:
    """
    Read and verify one slice, recording the read in the store's read log.

    Raises:
        SliceNotFoundError: If the slice file is missing
        CorruptSliceError: On checksum, header or shape mismatch
    """
    target = store.slice_path(index)
    try:
        payload = target.read_bytes()
    except FileNotFoundError as e:
        raise SliceNotFoundError(f"Slice {index} missing: {target}") from e
    except OSError as e:
        raise StorageError(f"Failed to read {target}: {e}") from e
    if hashlib.sha256(payload).hexdigest() != store.checksums[index]:
        raise CorruptSliceError(index, "checksum mismatch")
    matrix = decode_slice(payload, index)
    if matrix.shape != (store.slice_row_counts[index], store.cols):
        raise CorruptSliceError(
            index, f"shape {matrix.shape} differs from manifest {(store.slice_row_counts[index], store.cols)}",
        )
    store.read_log.record(index, len(payload))
    return matrix


def slice_iter(store: SliceStore) -> Iterator[tuple[int, Matrix]]:
    """
    Stream slices in order, each exactly once, one slice resident at a time.

    Yields:
        (slice_index, matrix) with slice_index counted from 0
    """
    for index in range(store.n_slices):
        yield index, read_slice(store, index)


def concatenate(store: SliceStore) -> Matrix:
    """Reassemble the full matrix in core (small stores and oracles only)."""
    return stack_rows([matrix for _, matrix in slice_iter(store)])


def select_rows(store: SliceStore, rows: np.ndarray, path: Path | str, max_rows_per_slice: int) -> SliceStore:
    """
    Copy the given rows (in increasing order) into a new store in one pass.

    Args:
        store: Source store
        rows: Global row indices to keep
        path: Target store directory
        max_rows_per_slice: Row cap of the output slices
    """
    rows = np.unique(np.asarray(rows, dtype=INDEX_DTYPE))
    if rows.size and (rows[0] < 0 or rows[-1] >= store.n_total):
        raise ShapeError("Row selection out of range", (int(rows[0]), int(rows[-1])), store.shape)
    pending: list[Matrix] = []
    pending_rows = 0
    offset = 0
    with SliceStoreWriter(path, cols=store.cols, kind=store.storage_kind, source=store) as writer:
        for index, matrix in slice_iter(store):
            count = store.slice_row_counts[index]
            lo, hi = np.searchsorted(rows, [offset, offset + count])
            local = rows[lo:hi] - offset
            offset += count
            if local.size == 0:
                continue
            part = matrix.tocsr()[local] if sp.issparse(matrix) else matrix[local]
            pending.append(part)
            pending_rows += part.shape[0]
            while pending_rows >= max_rows_per_slice:
                block = stack_rows(pending)
                writer.append(block[:max_rows_per_slice])
                rest = block[max_rows_per_slice:]
                pending = [rest] if rest.shape[0] else []
                pending_rows = rest.shape[0]
        if pending_rows or not writer.row_counts:
            if pending:
                writer.append(stack_rows(pending))
            else:
                writer.append(np.zeros((0, store.cols), dtype=VALUE_DTYPE))
    return writer.close()


def write_blocks(blocks: Iterator[Matrix], path: Path | str, cols: int, kind: StorageKind) -> SliceStore:
    """Write an iterator of row blocks as consecutive slices."""
    with SliceStoreWriter(path, cols=cols, kind=kind) as writer:
        for block in blocks:
            writer.append(block)
    return writer.close()


def save_labels(store: SliceStore, labels: np.ndarray) -> Path:
    labels = np.asarray(labels, dtype=INDEX_DTYPE)
    if labels.shape != (store.n_total,):
        raise ShapeError("Labels must hold one entry per row", labels.shape, store.shape)
    target = store.path / LABELS_NAME
    np.save(target, labels)
    return target


def load_labels(store: SliceStore) -> np.ndarray | None:
    target = store.path / LABELS_NAME
    if not target.exists():
        return None
    labels = np.load(target)
    if labels.shape != (store.n_total,):
        raise ShapeError("Stored labels do not match the store row count", labels.shape, store.shape)
    return labels
