"""
End-to-end comparison run for a validated pipeline config.
"""

import logging
import shutil
import tempfile
from pathlib import Path

from .comparison import EvalReport
from .comparison import run_comparison
from .ingest import ingest
from .pipeline_config import InputKind
from .pipeline_config import PipelineConfig
from .synthetic import LabeledDataset

logger = logging.getLogger(__name__)


def run_pipeline(config: PipelineConfig) -> EvalReport:
    """
    Ingest the configured input into scratch space and run the sweep on it.

    Store inputs are read in place. Everything else is materialized into a
    temporary store that is removed afterwards; synthetic data is generated
    from the ``synthesis`` sub-seed of the root seed.
    """
    scratch = Path(config.scratch_dir) if config.scratch_dir else None
    if scratch is not None:
        scratch.mkdir(parents=True, exist_ok=True)
    workdir = Path(tempfile.mkdtemp(prefix="lsrpca-data-", dir=scratch))
    try:
        store = ingest(config.input, workdir / "store", config.slice_rows, config.data_seed)
        n_classes = config.input.synthetic.n_classes if config.input.kind is InputKind.SYNTHETIC else None
        data = LabeledDataset.from_store(store, n_classes=n_classes)
        logger.info(
            f"Running {len(config.methods)} methods x {len(config.ks)} values of K on "
            f"{store.n_total}x{store.cols} ({data.n_classes} classes), root seed {config.root_seed}",
        )
        return run_comparison(
            data,
            config.ks,
            config.methods,
            config.oversampling,
            config.folds,
            config.seeds,
            config.comparison_options(),
        )
    finally:
        shutil.rmtree(workdir, ignore_errors=True)
