"""
Matrix interchange formats.

Matrix Market (coordinate and array) goes through ``scipy.io``; dense CSV
through ``numpy.loadtxt``. When a reader rejects a file, the file is scanned
once more to point the error at the first offending line.
"""

import logging
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import MatrixParseError
from .matrices import INDEX_DTYPE
from .matrices import VALUE_DTYPE
from .matrices import Matrix
from .matrices import as_dense
from .matrices import as_sparse

logger = logging.getLogger(__name__)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _locate_matrix_market_error(path: Path, fmt: str, field: str) -> int | None:
    """Return the 1-based line number of the first malformed line, if any."""
    width = 1 if fmt == "array" else (2 if field == "pattern" else 3)
    size_seen = False
    rows = cols = 0
    with path.open() as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            tokens = line.split()
            if not size_seen:
                size_seen = True
                if not all(t.isdigit() for t in tokens) or len(tokens) < 2:
                    return number
                rows, cols = int(tokens[0]), int(tokens[1])
                continue
            if len(tokens) != width or not all(_is_number(t) for t in tokens):
                return number
            if fmt == "coordinate":
                i, j = tokens[0], tokens[1]
                if not (i.isdigit() and j.isdigit()) or not (1 <= int(i) <= rows and 1 <= int(j) <= cols):
                    return number
    return None


def read_matrix_market(path: Path | str) -> Matrix:
    """
    Read a Matrix Market file.

    Coordinate files become canonical sparse matrices, array files dense ones.

    Raises:
        MatrixParseError: If the file is missing, complex valued or malformed
    """
    path = Path(path)
    if not path.exists():
        raise MatrixParseError(str(path), "file not found")
    try:
        rows, cols, entries, fmt, field, symmetry = scipy.io.mminfo(str(path))
    except (ValueError, OSError) as e:
        raise MatrixParseError(str(path), f"invalid Matrix Market header: {e}", line=1) from e
    if field == "complex":
        raise MatrixParseError(str(path), "complex matrices are not supported")
    line = _locate_matrix_market_error(path, fmt, field)
    if line is not None:
        raise MatrixParseError(str(path), "malformed entry", line=line)
    try:
        result = scipy.io.mmread(str(path))
    except (ValueError, IndexError, OSError) as e:
        raise MatrixParseError(str(path), f"malformed body: {e}") from e
    logger.info(f"Read {rows}x{cols} {fmt} Matrix Market file {path.name} ({entries} entries, {symmetry})")
    if fmt == "coordinate":
        return as_sparse(result)
    return as_dense(result)


def write_matrix_market(path: Path | str, x: Matrix) -> Path:
    """Write ``x`` as coordinate (sparse) or array (dense) Matrix Market."""
    path = Path(path).with_suffix(".mtx")
    payload = sp.coo_matrix(x) if sp.issparse(x) else np.asarray(x, dtype=VALUE_DTYPE)
    scipy.io.mmwrite(str(path), payload, field="real")
    return path


def read_csv(path: Path | str, delimiter: str = ",", *, skip_header: bool = False) -> np.ndarray:
    """
    Read a small dense matrix from a delimited text file.

    Raises:
        MatrixParseError: With the line number of the first malformed row
    """
    path = Path(path)
    if not path.exists():
        raise MatrixParseError(str(path), "file not found")
    try:
        values = np.loadtxt(path, delimiter=delimiter, dtype=np.float64, ndmin=2, skiprows=int(skip_header))
    except ValueError as e:
        raise MatrixParseError(str(path), f"malformed row: {e}", line=_locate_csv_error(path, delimiter, skip_header)) from e
    return as_dense(values)


def _locate_csv_error(path: Path, delimiter: str, skip_header: bool) -> int | None:
    width = None
    with path.open() as handle:
        for number, raw in enumerate(handle, start=1):
            if skip_header and number == 1:
                continue
            line = raw.strip()
            if not line:
                continue
            tokens = line.split(delimiter)
            if width is None:
                width = len(tokens)
            if len(tokens) != width or not all(_is_number(t) for t in tokens):
                return number
    return None


def read_labels(path: Path | str) -> np.ndarray:
    """Read integer class labels, one per line."""
    path = Path(path)
    if not path.exists():
        raise MatrixParseError(str(path), "file not found")
    with path.open() as handle:
        labels = []
        for number, raw in enumerate(handle, start=1):
            token = raw.strip()
            if not token:
                continue
            if not token.isdigit():
                raise MatrixParseError(str(path), f"label {token!r} is not a non-negative integer", line=number)
            labels.append(int(token))
    return np.asarray(labels, dtype=INDEX_DTYPE)


def binarize(x: Matrix) -> Matrix:
    """Indicator matrix of the nonzero pattern (count features -> binary features)."""
    if sp.issparse(x):
        out = as_sparse(x)
        out.data[:] = 1.0
        return out
    return as_dense(np.asarray(x) != 0)
