import numpy as np
import pytest

from lsrpca.reduction.models import Experiment
from lsrpca.reduction.modules.seeds import generator
from lsrpca.reduction.modules.slice_store import SliceStore
from lsrpca.reduction.modules.slice_store import partition
from lsrpca.reduction.modules.slice_store import save_labels
from lsrpca.reduction.tests.factories import ExperimentFactory


@pytest.fixture(autouse=True)
def _scratch_dir(settings, tmp_path) -> None:
    settings.LSRPCA_SCRATCH_DIR = str(tmp_path / "scratch")


@pytest.fixture
def rng() -> np.random.Generator:
    return generator(20240611)


@pytest.fixture
def dense_matrix(rng) -> np.ndarray:
    return rng.standard_normal((40, 6)).astype(np.float32)


@pytest.fixture
def small_store(dense_matrix, tmp_path) -> SliceStore:
    return partition(dense_matrix, 16, tmp_path / "small")


@pytest.fixture
def labeled_store(rng, tmp_path) -> SliceStore:
    """60 x 8 dense store with three well separated classes."""
    labels = np.arange(60) % 3
    x = rng.standard_normal((60, 8)) + 4.0 * np.eye(3, 8)[labels]
    store = partition(x.astype(np.float32), 25, tmp_path / "labeled")
    save_labels(store, labels)
    return store


@pytest.fixture
def experiment(db) -> Experiment:
    return ExperimentFactory()
