"""
Validated pipeline configuration.

The INI file is parsed and validated section by section in
``lsrpca.reduction.forms``; this module holds the resulting typed value
object and the derived settings the pipeline consumes.
"""

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import Enum
from pathlib import Path

from .comparison import ComparisonOptions
from .comparison import Protocol
from .comparison import SeedMode
from .normalization import NormMode
from .rpca import Oversampling
from .rpca import ProjectionMethod
from .seeds import derive_seed
from .synthetic import SyntheticSpec


class InputKind(Enum):
    MATRIX_MARKET = "matrix_market"
    CSV = "csv"
    STORE = "store"
    SYNTHETIC = "synthetic"


class ReportFormat(Enum):
    CSV = "csv"
    JSON = "json"
    XLSX = "xlsx"


@dataclass(frozen=True)
class InputSpec:
    kind: InputKind
    path: Path | None = None
    labels: Path | None = None
    binarize: bool = False
    delimiter: str = ","
    skip_header: bool = False
    synthetic: SyntheticSpec | None = None


@dataclass(frozen=True)
class PipelineConfig:
    input: InputSpec
    output_dir: Path
    norm_mode: NormMode = NormMode.SPARSE
    column_kinds: str | None = None
    methods: tuple[ProjectionMethod, ...] = (ProjectionMethod.RP, ProjectionMethod.LS_RPCA)
    ks: tuple[int, ...] = (10,)
    oversampling: tuple[Oversampling, ...] = (Oversampling(),)
    seed_mode: SeedMode = SeedMode.SHARED
    rank_tolerance: float = 1e-6
    protocol: Protocol = Protocol.KFOLD
    folds: int = 5
    train_fraction: float = 0.8
    root_seed: int = 0
    replicates: int = 1
    fit_sample_size: int | None = None
    renormalize: bool = True
    reg: float = 1.0
    max_iter: int = 500
    tol: float = 1e-6
    slice_rows: int = 4096
    scratch_dir: Path | None = None
    formats: tuple[ReportFormat, ...] = field(default=(ReportFormat.CSV, ReportFormat.JSON))

    @property
    def seeds(self) -> list[int]:
        """Replicate seeds derived from the root seed."""
        return [derive_seed(self.root_seed, "replicate", i) for i in range(self.replicates)]

    @property
    def data_seed(self) -> int:
        return derive_seed(self.root_seed, "synthesis")

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, root_seed=seed)

    def comparison_options(self) -> ComparisonOptions:
        return ComparisonOptions(
            protocol=self.protocol,
            train_fraction=self.train_fraction,
            seed_mode=self.seed_mode,
            fit_sample_size=self.fit_sample_size,
            norm_mode=self.norm_mode,
            column_kinds=self.column_kinds,
            renormalize=self.renormalize,
            reg=self.reg,
            max_iter=self.max_iter,
            tol=self.tol,
            rank_tolerance=self.rank_tolerance,
            max_rows_per_slice=self.slice_rows,
            scratch_dir=self.scratch_dir,
        )
