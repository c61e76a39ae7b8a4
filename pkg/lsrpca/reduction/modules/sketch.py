"""
Gaussian Sketches
=================

Seeded Gaussian random matrices and the random projection (RP) baseline
``X_proj = (1/sqrt(K)) X Omega``.

Omega is drawn from numpy's Philox counter-based generator with the ziggurat
normal transform. Draws are taken row by row of Omega transposed, so the
first K columns of a K̄-column sketch equal the K-column sketch drawn with
the same seed. Sketches are persisted as (seed, p, k, generator version) and
regenerated on load.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import PreconditionError
from .exceptions import ShapeError
from .exceptions import StorageError
from .instrumentation import log_phase
from .matrices import ACCUM_DTYPE
from .matrices import VALUE_DTYPE
from .matrices import DenseMatrix
from .matrices import Matrix
from .matrices import matmul
from .seeds import generator
from .slice_store import SliceStore
from .slice_store import SliceStoreWriter
from .slice_store import StorageKind
from .slice_store import load_labels
from .slice_store import save_labels
from .slice_store import slice_iter

logger = logging.getLogger(__name__)

GENERATOR_VERSION = "philox-ziggurat-v1"


@dataclass(frozen=True, eq=False)
class GaussianSketch:
    omega: DenseMatrix
    seed: int

    @property
    def p(self) -> int:
        return int(self.omega.shape[0])

    @property
    def k(self) -> int:
        return int(self.omega.shape[1])

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.k)

    def leading(self, k: int) -> "GaussianSketch":
        """The sketch with the first ``k`` columns; equal to ``make_gaussian(p, k, seed)``."""
        if not 1 <= k <= self.k:
            raise PreconditionError(f"Cannot take {k} leading columns of a {self.k}-column sketch")
        return GaussianSketch(omega=np.asfortranarray(self.omega[:, :k]), seed=self.seed)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "p": self.p, "k": self.k, "generator": GENERATOR_VERSION}

    @classmethod
    def from_dict(cls, payload: dict) -> "GaussianSketch":
        if payload.get("generator") != GENERATOR_VERSION:
            raise StorageError(
                f"Sketch was drawn with generator {payload.get('generator')!r}; "
                f"this build regenerates {GENERATOR_VERSION!r} only",
            )
        return make_gaussian(int(payload["p"]), int(payload["k"]), int(payload["seed"]))


def make_gaussian(p: int, k: int, seed: int) -> GaussianSketch:
    """
    Draw a P x K matrix of i.i.d. standard normal entries.

    A K larger than P is allowed (an embedding rather than a reduction) and
    only logged.

    Raises:
        PreconditionError: If ``p`` or ``k`` is below 1
    """
    if p < 1 or k < 1:
        raise PreconditionError(f"Sketch dimensions must be positive, got p={p}, k={k}")
    if k > p:
        logger.warning(f"Sketch with k={k} > p={p} embeds rather than reduces the data")
    draws = generator(seed).standard_normal((k, p))
    omega = np.asfortranarray(draws.T, dtype=VALUE_DTYPE)
    return GaussianSketch(omega=omega, seed=int(seed))


def rp_project_array(x: Matrix, sketch: GaussianSketch) -> DenseMatrix:
    if x.shape[1] != sketch.p:
        raise ShapeError("Matrix columns do not match the sketch", x.shape, sketch.omega.shape)
    product = matmul(x, sketch.omega, dtype=ACCUM_DTYPE)
    return np.asfortranarray(product * sketch.scale, dtype=VALUE_DTYPE)


def rp_project(store: SliceStore, sketch: GaussianSketch, path: Path | str) -> SliceStore:
    """
    Stream ``(1/sqrt(K)) X_s Omega`` for every slice into a dense store.

    Raises:
        ShapeError: If the store column count differs from the sketch rows
    """
    if store.cols != sketch.p:
        raise ShapeError("Store columns do not match the sketch", store.shape, sketch.omega.shape)
    with log_phase("rp-project", store.read_log):
        with SliceStoreWriter(path, cols=sketch.k, kind=StorageKind.DENSE, source=store) as writer:
            for _, block in slice_iter(store):
                writer.append(rp_project_array(block, sketch))
        out = writer.close()
    labels = load_labels(store)
    if labels is not None:
        save_labels(out, labels)
    return out
