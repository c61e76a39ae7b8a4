"""
Comparison Harness
==================

Runs the dimensionality-reduction comparison as preprocessing for a
classifier. For every (seed, fold) the training rows are normalized, a
projection is fitted on them (optionally on a seeded subsample), train and
test rows are projected and renormalized with statistics of the projected
training rows, a logistic regression is trained, and the test rows are
scored by multi-class log-loss and error rate.

A cell that fails is recorded with ``CellStatus.FAILED`` and its cause; the
sweep carries on.

Sub-seeds per replicate seed:

- ``folds``: row shuffle of the k-fold / holdout split
- ``sketch``: Omega, per fold; shared by RP and the randomized PCA methods in
  ``shared`` seed mode and separate per method in ``independent`` mode
- ``subsample``: rows used to fit the projection when ``fit_sample_size`` is set
"""

import logging
import shutil
import tempfile
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from pathlib import Path

import numpy as np

from .classifier import DEFAULT_MAX_ITER
from .classifier import DEFAULT_REG
from .classifier import DEFAULT_TOL
from .classifier import train_logreg
from .exceptions import ConfigError
from .exceptions import LsrpcaError
from .exceptions import PreconditionError
from .instrumentation import log_phase
from .metrics import error_rate
from .metrics import multiclass_log_loss
from .normalization import NormMode
from .normalization import apply_norm
from .normalization import fit_norm
from .normalization import renormalize
from .qr_tiled import DEFAULT_RANK_TOLERANCE
from .rpca import Oversampling
from .rpca import ProjectionMethod
from .rpca import fit_projection
from .rpca import project_in_core
from .seeds import derive_seed
from .seeds import generator
from .slice_store import SliceStore
from .slice_store import select_rows
from .synthetic import LabeledDataset

logger = logging.getLogger(__name__)

NO_OVERSAMPLING = "none"


class CellStatus(Enum):
    OK = "ok"
    FAILED = "failed"


class Protocol(Enum):
    KFOLD = "kfold"
    HOLDOUT = "holdout"


class SeedMode(Enum):
    SHARED = "shared"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class ComparisonOptions:
    protocol: Protocol = Protocol.KFOLD
    train_fraction: float = 0.8
    seed_mode: SeedMode = SeedMode.SHARED
    fit_sample_size: int | None = None
    norm_mode: NormMode = NormMode.SPARSE
    column_kinds: str | None = None
    renormalize: bool = True
    reg: float = DEFAULT_REG
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE
    max_rows_per_slice: int = 4096
    scratch_dir: Path | None = None


@dataclass
class EvalEntry:
    method: str
    k: int
    oversampling: str
    seed: int
    fold: int
    kbar: int | None = None
    fit_rows: int = 0
    log_loss: float | None = None
    error_rate: float | None = None
    status: CellStatus = CellStatus.OK
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status is CellStatus.OK

    def to_row(self) -> dict:
        row = asdict(self)
        row["status"] = self.status.value
        return row

    @classmethod
    def from_row(cls, row: dict) -> "EvalEntry":
        def number(value, kind):
            return None if value in (None, "") else kind(value)

        return cls(
            method=row["method"],
            k=int(row["k"]),
            oversampling=row["oversampling"],
            seed=int(row["seed"]),
            fold=int(row["fold"]),
            kbar=number(row.get("kbar"), int),
            fit_rows=int(row.get("fit_rows") or 0),
            log_loss=number(row.get("log_loss"), float),
            error_rate=number(row.get("error_rate"), float),
            status=CellStatus(row.get("status") or CellStatus.OK.value),
            error=row.get("error") or "",
        )


ENTRY_FIELDS = list(EvalEntry.__dataclass_fields__)


@dataclass
class Aggregate:
    method: str
    oversampling: str
    k: int
    n: int
    mean_log_loss: float
    sd_log_loss: float
    mean_error_rate: float
    sd_error_rate: float
    error_reduction: float | None = None
    log_loss_reduction: float | None = None


def _mean_sd(values: list[float]) -> tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    sd = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return float(array.mean()), sd


def _reduction(baseline: float, value: float) -> float | None:
    return None if baseline == 0 else (baseline - value) / baseline


@dataclass
class EvalReport:
    entries: list[EvalEntry] = field(default_factory=list)
    n_folds: int = 1

    @property
    def failed(self) -> list[EvalEntry]:
        return [e for e in self.entries if not e.ok]

    def aggregates(self) -> list[Aggregate]:
        """
        Mean and sd of both metrics per (method, oversampling, K) over the
        successful cells, plus the relative reduction versus RP at the same K.
        """
        groups: dict[tuple[str, str, int], list[EvalEntry]] = defaultdict(list)
        for entry in self.entries:
            if entry.ok:
                groups[(entry.method, entry.oversampling, entry.k)].append(entry)
        result = []
        for (method, oversampling, k), members in sorted(groups.items(), key=lambda item: (item[0][2], item[0][0], item[0][1])):
            mean_loss, sd_loss = _mean_sd([e.log_loss for e in members])
            mean_err, sd_err = _mean_sd([e.error_rate for e in members])
            result.append(Aggregate(method, oversampling, k, len(members), mean_loss, sd_loss, mean_err, sd_err))
        baselines = {a.k: a for a in result if a.method == ProjectionMethod.RP.value}
        for aggregate in result:
            baseline = baselines.get(aggregate.k)
            if baseline is None or aggregate is baseline:
                continue
            aggregate.error_reduction = _reduction(baseline.mean_error_rate, aggregate.mean_error_rate)
            aggregate.log_loss_reduction = _reduction(baseline.mean_log_loss, aggregate.mean_log_loss)
        return result

    def mean_error(self, method: str, k: int, oversampling: str | None = None) -> float:
        values = [
            e.error_rate for e in self.entries
            if e.ok and e.method == method and e.k == k and (oversampling is None or e.oversampling == oversampling)
        ]
        if not values:
            raise KeyError(f"No successful cells for {method} at K={k}")
        return float(np.mean(values))

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "entries": [e.to_row() for e in self.entries],
            "aggregates": [asdict(a) for a in self.aggregates()],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalReport":
        return cls(entries=[EvalEntry.from_row(row) for row in payload["entries"]], n_folds=int(payload.get("n_folds", 1)))


# ------------------------------------------------------------------------------
# Splits
# ------------------------------------------------------------------------------


def fold_splits(n: int, n_folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded k-fold (train, test) row indices, each sorted."""
    if n_folds < 2:
        raise ConfigError(f"k-fold evaluation needs at least 2 folds, got {n_folds}")
    if n < n_folds:
        raise PreconditionError(f"Cannot split {n} rows into {n_folds} folds")
    order = generator(derive_seed(seed, "folds")).permutation(n)
    splits = []
    for test in np.array_split(order, n_folds):
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        splits.append((np.flatnonzero(mask), np.sort(test)))
    return splits


def holdout_split(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded split drawn without replacement; ``train_fraction`` of rows train."""
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * n))
    if not 0 < n_train < n:
        raise PreconditionError(f"Holdout of {n} rows at {train_fraction} leaves an empty side")
    order = generator(derive_seed(seed, "folds")).permutation(n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def check_hygiene(fit_rows: np.ndarray, test_rows: np.ndarray) -> None:
    """Refuse to fit anything on rows that are scored later."""
    leaked = np.intersect1d(fit_rows, test_rows)
    if leaked.size:
        raise PreconditionError(f"{leaked.size} test rows reached a fitting step")


# ------------------------------------------------------------------------------
# Sweep
# ------------------------------------------------------------------------------


def _cells(ks: Sequence[int], methods: Sequence[ProjectionMethod], modes: Sequence[Oversampling]):
    for method in methods:
        randomized = method in (ProjectionMethod.LS_RPCA, ProjectionMethod.RPCA_BASELINE)
        for mode in (modes if randomized else [None]):
            for k in ks:
                yield method, mode, k


def _sketch_seed(seed: int, fold: int, method: ProjectionMethod, seed_mode: SeedMode) -> int:
    if seed_mode is SeedMode.SHARED:
        return derive_seed(seed, "sketch", fold)
    return derive_seed(seed, "sketch", method.value, fold)


def _evaluate_cell(
    entry: EvalEntry,
    fit_store: SliceStore,
    train_store: SliceStore,
    test_store: SliceStore,
    train_labels: np.ndarray,
    test_labels: np.ndarray,
    n_classes: int,
    method: ProjectionMethod,
    mode: Oversampling | None,
    sketch_seed: int,
    options: ComparisonOptions,
) -> None:
    model = fit_projection(
        fit_store, method, entry.k, mode or Oversampling(), sketch_seed, tolerance=options.rank_tolerance,
    )
    entry.kbar = model.kbar
    entry.fit_rows = model.fit_rows
    train_x = project_in_core(train_store, model)
    test_x = project_in_core(test_store, model)
    if options.renormalize:
        _, (train_x, test_x) = renormalize(train_x, test_x)
    classifier = train_logreg(
        train_x, train_labels, n_classes=n_classes, reg=options.reg, max_iter=options.max_iter, tol=options.tol,
    )
    probs = classifier.predict_proba(test_x)
    entry.log_loss = multiclass_log_loss(probs, test_labels)
    entry.error_rate = error_rate(np.argmax(probs, axis=1), test_labels)


def _run_fold(
    data: LabeledDataset,
    train_rows: np.ndarray,
    test_rows: np.ndarray,
    seed: int,
    fold: int,
    cells: list,
    options: ComparisonOptions,
    workdir: Path,
) -> list[EvalEntry]:
    entries = [
        EvalEntry(method=m.value, k=k, oversampling=str(mode) if mode else NO_OVERSAMPLING, seed=seed, fold=fold)
        for m, mode, k in cells
    ]
    try:
        check_hygiene(train_rows, test_rows)
        slice_rows = options.max_rows_per_slice
        train_raw = select_rows(data.features, train_rows, workdir / "train_raw", slice_rows)
        test_raw = select_rows(data.features, test_rows, workdir / "test_raw", slice_rows)
        stats = fit_norm(train_raw, options.norm_mode, options.column_kinds)
        train_store = apply_norm(train_raw, stats, workdir / "train")
        test_store = apply_norm(test_raw, stats, workdir / "test")
        fit_store = train_store
        if options.fit_sample_size is not None and options.fit_sample_size < train_store.n_total:
            picker = generator(derive_seed(seed, "subsample", fold))
            local = np.sort(picker.choice(train_store.n_total, size=options.fit_sample_size, replace=False))
            check_hygiene(train_rows[local], test_rows)
            fit_store = select_rows(train_store, local, workdir / "fit", slice_rows)
    except LsrpcaError as e:
        logger.warning(f"Seed {seed} fold {fold}: data preparation failed: {e}")
        for entry in entries:
            entry.status, entry.error = CellStatus.FAILED, str(e)
        return entries

    train_labels, test_labels = data.labels[train_rows], data.labels[test_rows]
    for entry, (method, mode, k) in zip(entries, cells, strict=True):
        try:
            _evaluate_cell(
                entry, fit_store, train_store, test_store, train_labels, test_labels, data.n_classes,
                method, mode, _sketch_seed(seed, fold, method, options.seed_mode), options,
            )
        except (LsrpcaError, np.linalg.LinAlgError, ValueError) as e:
            entry.status, entry.error = CellStatus.FAILED, str(e)
            logger.warning(f"Cell {entry.method} K={k} {entry.oversampling} seed {seed} fold {fold} failed: {e}")
    return entries


def run_comparison(
    data: LabeledDataset,
    ks: Sequence[int],
    methods: Sequence[ProjectionMethod | str],
    oversampling_modes: Sequence[Oversampling | str],
    n_folds: int,
    seeds: Sequence[int],
    options: ComparisonOptions | None = None,
) -> EvalReport:
    """
    Evaluate every (method, K, oversampling mode, seed, fold) cell.

    Args:
        data: Labeled dataset on disk
        ks: Target dimensionalities, each <= P
        methods: Projection methods to compare
        oversampling_modes: Modes applied to the randomized PCA methods
        n_folds: Fold count of the k-fold protocol (ignored for holdout)
        seeds: Replicate seeds
        options: Protocol, normalization and classifier settings

    Returns:
        EvalReport with one entry per cell
    """
    options = options or ComparisonOptions()
    methods = [ProjectionMethod.parse(m) for m in methods]
    modes = [Oversampling.parse(m) for m in oversampling_modes] or [Oversampling()]
    if not ks or any(k < 1 or k > data.features.cols for k in ks):
        raise ConfigError(f"Every K must lie in [1, {data.features.cols}], got {list(ks)}")
    if not methods or not seeds:
        raise ConfigError("At least one method and one seed are required")
    cells = list(_cells(ks, methods, modes))
    n = data.features.n_total
    report = EvalReport(n_folds=n_folds if options.protocol is Protocol.KFOLD else 1)
    scratch = Path(options.scratch_dir) if options.scratch_dir else None
    if scratch is not None:
        scratch.mkdir(parents=True, exist_ok=True)

    for seed in seeds:
        if options.protocol is Protocol.KFOLD:
            splits = fold_splits(n, n_folds, seed)
        else:
            splits = [holdout_split(n, options.train_fraction, seed)]
        for fold, (train_rows, test_rows) in enumerate(splits):
            workdir = Path(tempfile.mkdtemp(prefix=f"lsrpca-s{seed}-f{fold}-", dir=scratch))
            try:
                with log_phase(f"evaluate seed={seed} fold={fold}", data.features.read_log):
                    report.entries.extend(_run_fold(data, train_rows, test_rows, seed, fold, cells, options, workdir))
            finally:
                shutil.rmtree(workdir, ignore_errors=True)
    logger.info(
        f"Comparison finished: {len(report.entries)} cells, {len(report.failed)} failed, "
        f"{len(seeds)} seeds x {report.n_folds} folds",
    )
    return report


def expected_cells(n_ks: int, methods: Sequence[ProjectionMethod | str], n_modes: int, n_folds: int, n_seeds: int) -> int:
    """Number of entries ``run_comparison`` produces for a sweep."""
    per_k = sum(
        max(n_modes, 1) if ProjectionMethod.parse(m) in (ProjectionMethod.LS_RPCA, ProjectionMethod.RPCA_BASELINE) else 1
        for m in methods
    )
    return per_k * n_ks * n_folds * n_seeds
