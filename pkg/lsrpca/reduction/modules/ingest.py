"""
Turn an input description into a slice store.
"""

import logging
from pathlib import Path

from .exceptions import ConfigError
from .exceptions import LabelError
from .instrumentation import log_phase
from .interchange import binarize
from .interchange import read_csv
from .interchange import read_labels
from .interchange import read_matrix_market
from .pipeline_config import InputKind
from .pipeline_config import InputSpec
from .slice_store import SliceStore
from .slice_store import open_store
from .slice_store import partition
from .slice_store import save_labels
from .synthetic import make_synthetic

logger = logging.getLogger(__name__)


def ingest(spec: InputSpec, path: Path | str, slice_rows: int, seed: int) -> SliceStore:
    """
    Materialize the input as a store at ``path``.

    Matrix Market and CSV inputs are parsed in core and partitioned; an
    existing store is opened in place (``path`` is ignored); a synthetic spec
    is generated slice by slice. Labels, when given, are stored next to the
    manifest.

    Raises:
        ConfigError: If a file input has no path or a synthetic input no spec
        MatrixParseError: If the matrix or label file is malformed
    """
    if spec.kind is InputKind.STORE:
        if spec.path is None:
            raise ConfigError("[input] path is required for a store input")
        return open_store(spec.path)
    if spec.kind is InputKind.SYNTHETIC:
        if spec.synthetic is None:
            raise ConfigError("A synthetic input needs n, p and rank")
        s = spec.synthetic
        with log_phase("ingest-synthetic"):
            dataset = make_synthetic(
                s.n, s.p, s.rank, s.n_classes, s.noise_sd, seed,
                path=path, max_rows_per_slice=slice_rows, separation=s.separation, center_decay=s.center_decay,
            )
        return dataset.features
    if spec.path is None:
        raise ConfigError(f"[input] path is required for a {spec.kind.value} input")
    with log_phase(f"ingest-{spec.kind.value}"):
        if spec.kind is InputKind.MATRIX_MARKET:
            x = read_matrix_market(spec.path)
        else:
            x = read_csv(spec.path, spec.delimiter, skip_header=spec.skip_header)
        if spec.binarize:
            x = binarize(x)
        store = partition(x, slice_rows, path)
    if spec.labels is not None:
        labels = read_labels(spec.labels)
        if labels.shape[0] != store.n_total:
            raise LabelError(f"{spec.labels} holds {labels.shape[0]} labels for {store.n_total} rows")
        save_labels(store, labels)
    return store
