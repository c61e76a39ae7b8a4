"""
Labeled datasets and the synthetic low-rank generator.

``make_synthetic`` draws X = L·Rᵀ + noise:

- R (P x rank) has i.i.d. N(0, 1) loadings.
- Each row of L is its class center plus isotropic N(0, 1) within-class
  spread, so the nuisance directions share one scale.
- Class centers live in the latent space with per-coordinate scales decaying
  as j^-center_decay and are rescaled so the mean pairwise distance between
  centers equals ``separation`` within-class standard deviations. The class
  signal therefore shows up as the leading principal directions.
- Labels are the latent clusters, balanced and shuffled.

Latent rows and noise come from two separate generators drawn in row order,
so the dataset does not depend on how it is sliced.
"""

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .classifier import validate_labels
from .exceptions import LabelError
from .exceptions import PreconditionError
from .matrices import VALUE_DTYPE
from .seeds import derive_seed
from .seeds import generator
from .slice_store import SliceStore
from .slice_store import StorageKind
from .slice_store import load_labels
from .slice_store import save_labels
from .slice_store import write_blocks

logger = logging.getLogger(__name__)

DEFAULT_SEPARATION = 6.0
DEFAULT_CENTER_DECAY = 1.0


@dataclass(eq=False)
class LabeledDataset:
    features: SliceStore
    labels: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        validate_labels(self.labels, self.features.n_total, self.n_classes)

    @classmethod
    def from_store(cls, store: SliceStore, n_classes: int | None = None) -> "LabeledDataset":
        """
        Pair a store with the ``labels.npy`` saved next to it.

        Raises:
            LabelError: If the store has no labels or they fail validation
        """
        labels = load_labels(store)
        if labels is None:
            raise LabelError(f"Store {store.path} has no labels; ingest it with --labels")
        return cls(features=store, labels=labels, n_classes=n_classes or int(labels.max()) + 1)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    p: int
    rank: int
    n_classes: int = 2
    noise_sd: float = 0.1
    separation: float = DEFAULT_SEPARATION
    center_decay: float = DEFAULT_CENTER_DECAY

    def validate(self) -> None:
        if min(self.n, self.p, self.rank) < 1:
            raise PreconditionError(f"n, p and rank must be positive: {self}")
        if self.rank > min(self.n, self.p):
            raise PreconditionError(f"rank={self.rank} exceeds min(n, p)={min(self.n, self.p)}")
        if self.n_classes < 2 or self.n < self.n_classes:
            raise PreconditionError(f"Need at least two classes and one row per class: {self}")
        if self.noise_sd < 0 or self.separation <= 0:
            raise PreconditionError("noise_sd must be >= 0 and separation > 0")


def _class_centers(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    scales = np.arange(1, spec.rank + 1, dtype=np.float64) ** -spec.center_decay
    centers = rng.standard_normal((spec.n_classes, spec.rank)) * scales
    distances = [np.linalg.norm(a - b) for a, b in combinations(centers, 2)]
    return centers * (spec.separation / np.mean(distances))


def synthetic_blocks(spec: SyntheticSpec, seed: int, block_rows: int) -> tuple[Iterator[np.ndarray], np.ndarray]:
    """
    Row blocks of the synthetic matrix and the full label vector.

    The blocks are generated lazily; only one block is held at a time.
    """
    spec.validate()
    if block_rows < 1:
        raise PreconditionError(f"block_rows must be >= 1, got {block_rows}")
    structure = generator(derive_seed(seed, "synthetic", "structure"))
    loadings = structure.standard_normal((spec.p, spec.rank))
    centers = _class_centers(spec, structure)
    labels = structure.permutation(np.arange(spec.n) % spec.n_classes).astype(np.int64)

    def blocks() -> Iterator[np.ndarray]:
        latent = generator(derive_seed(seed, "synthetic", "latent"))
        noise = generator(derive_seed(seed, "synthetic", "noise"))
        for start in range(0, spec.n, block_rows):
            rows = labels[start:start + block_rows]
            z = centers[rows] + latent.standard_normal((rows.size, spec.rank))
            x = z @ loadings.T
            if spec.noise_sd:
                x += spec.noise_sd * noise.standard_normal((rows.size, spec.p))
            yield np.asfortranarray(x, dtype=VALUE_DTYPE)

    return blocks(), labels


def make_synthetic(
    n: int,
    p: int,
    rank: int,
    n_classes: int,
    noise_sd: float,
    seed: int,
    *,
    path: Path | str,
    max_rows_per_slice: int,
    separation: float = DEFAULT_SEPARATION,
    center_decay: float = DEFAULT_CENTER_DECAY,
) -> LabeledDataset:
    """
    Write a synthetic labeled low-rank dataset to a dense slice store.

    Raises:
        PreconditionError: On invalid sizes (e.g. rank > min(n, p))
    """
    spec = SyntheticSpec(n, p, rank, n_classes, noise_sd, separation, center_decay)
    blocks, labels = synthetic_blocks(spec, seed, max_rows_per_slice)
    store = write_blocks(blocks, path, cols=p, kind=StorageKind.DENSE)
    save_labels(store, labels)
    logger.info(f"Generated synthetic dataset {n}x{p}, rank {rank}, {n_classes} classes, seed {seed}")
    return LabeledDataset(features=store, labels=labels, n_classes=n_classes)


def make_synthetic_array(spec: SyntheticSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """The same dataset as ``make_synthetic`` held in core."""
    blocks, labels = synthetic_blocks(spec, seed, spec.n)
    return np.asfortranarray(np.vstack(list(blocks))), labels
