"""
Small-scale oracle suite.

Each check compares a streaming or optimized routine with an independent
in-core reference on seeded random instances and reports the worst error seen
against its tolerance. ``lsrpca oracle`` runs the suite; it is also a quick
installation self-test.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .classifier import LogisticObjective
from .matrices import as_sparse
from .matrices import matmul
from .qr_tiled import householder_qr
from .qr_tiled import qr_init
from .qr_tiled import qr_update
from .rpca import baseline_rpca
from .rpca import exact_truncated_svd
from .rpca import ls_rpca
from .seeds import derive_seed
from .seeds import generator
from .sketch import make_gaussian
from .sketch import rp_project_array
from .slice_store import SliceStore
from .slice_store import StorageKind
from .slice_store import concatenate
from .slice_store import partition
from .slice_store import write_blocks

logger = logging.getLogger(__name__)


@dataclass
class OracleCheck:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


def random_partition(rng: np.random.Generator, n: int, first_min: int, pieces: int) -> list[int]:
    """Random slice row counts summing to ``n`` with a first slice of at least ``first_min`` rows."""
    cuts = np.sort(rng.choice(np.arange(first_min + 1, n), size=min(pieces - 1, n - first_min - 1), replace=False))
    bounds = [0, *cuts.tolist(), n]
    return [b - a for a, b in zip(bounds[:-1], bounds[1:], strict=True)]


def write_partitioned(x: np.ndarray, counts: list[int], path: Path) -> SliceStore:
    starts = np.cumsum([0, *counts[:-1]])
    blocks = (x[s:s + c] for s, c in zip(starts, counts, strict=True))
    return write_blocks(blocks, path, cols=x.shape[1], kind=StorageKind.DENSE)


def low_rank_matrix(rng: np.random.Generator, n: int, p: int, rank: int) -> np.ndarray:
    """Random n x p matrix of exact rank ``rank`` with singular values spread over [1, rank]."""
    left, _ = np.linalg.qr(rng.standard_normal((n, rank)))
    right, _ = np.linalg.qr(rng.standard_normal((p, rank)))
    return np.asfortranarray((left * np.arange(rank, 0, -1)) @ right.T, dtype=np.float32)


def _align_signs(reference: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    signs = np.sign(np.sum(reference * candidate, axis=0))
    signs[signs == 0] = 1.0
    return candidate * signs


def check_partition_round_trip(workdir: Path, seed: int) -> OracleCheck:
    rng = generator(derive_seed(seed, "oracle", "partition"))
    dense = rng.standard_normal((50, 8)).astype(np.float32)
    sparse = as_sparse(sp.random(50, 8, density=0.2, random_state=rng, dtype=np.float32))
    error = 0.0
    for name, x in (("dense", dense), ("sparse", sparse)):
        back = concatenate(partition(x, 7, workdir / f"roundtrip_{name}"))
        diff = (back - x).toarray() if sp.issparse(x) else back - x
        error = max(error, float(np.abs(diff).max(initial=0.0)))
    return OracleCheck("partition round-trip", error, 0.0)


def check_sparse_matmul(workdir: Path, seed: int) -> OracleCheck:
    rng = generator(derive_seed(seed, "oracle", "matmul"))
    a = as_sparse(sp.random(20, 10, density=0.1, random_state=rng, dtype=np.float32))
    b = rng.standard_normal((10, 4)).astype(np.float32)
    reference = a.toarray().astype(np.float64) @ b.astype(np.float64)
    error = float(np.abs(matmul(a, b) - reference).max() / max(np.abs(reference).max(), 1e-30))
    return OracleCheck("sparse x dense matmul", error, 1e-5)


def check_tiled_qr(workdir: Path, seed: int, trials: int = 10) -> OracleCheck:
    rng = generator(derive_seed(seed, "oracle", "qr"))
    error = 0.0
    for _ in range(trials):
        kbar = int(rng.integers(1, 12))
        rows = int(rng.integers(kbar + 2, 200))
        y = rng.standard_normal((rows, kbar))
        counts = random_partition(rng, rows, kbar, int(rng.integers(1, 6)))
        state = qr_init(y[:counts[0]], kbar)
        start = counts[0]
        for count in counts[1:]:
            state = qr_update(state, y[start:start + count])
            start += count
        reference = householder_qr(y).r
        error = max(error, float(np.abs(state.r - reference).max() / np.abs(reference).max()))
    return OracleCheck("tiled QR slice invariance", error, 1e-4)


def check_ls_rpca_baseline(workdir: Path, seed: int, trials: int = 3) -> OracleCheck:
    rng = generator(derive_seed(seed, "oracle", "rpca"))
    error = 0.0
    for trial in range(trials):
        x = low_rank_matrix(rng, 200, 30, 10)
        k, kbar = 4, 8
        counts = random_partition(rng, 200, kbar, 4)
        store = write_partitioned(x, counts, workdir / f"rpca_{trial}")
        sketch_seed = derive_seed(seed, "oracle", "sketch", trial)
        streamed = ls_rpca(store, k, kbar, sketch_seed)
        in_core = baseline_rpca(x, k, kbar, sketch_seed)
        v_error = np.abs(_align_signs(in_core.v, streamed.v) - in_core.v).max()
        s_error = np.abs(streamed.singular_values - in_core.singular_values).max() / in_core.singular_values.max()
        error = max(error, float(v_error), float(s_error))
    return OracleCheck("LS-RPCA equals baseline RPCA", error, 1e-3)


def check_truncated_svd(workdir: Path, seed: int) -> OracleCheck:
    rng = generator(derive_seed(seed, "oracle", "svd"))
    x = rng.standard_normal((50, 30))
    u, sigma, v = exact_truncated_svd(x, 10)
    residual = np.linalg.norm(x - (u * sigma) @ v.T, 2)
    full = np.linalg.svd(x, compute_uv=False)
    return OracleCheck("truncated SVD residual identity", float(abs(residual - full[10]) / full[10]), 1e-3)


def check_logistic_gradient(workdir: Path, seed: int, points: int = 10) -> OracleCheck:
    rng = generator(derive_seed(seed, "oracle", "logreg"))
    labels = np.arange(60) % 3
    x = rng.standard_normal((60, 4)) + labels[:, None]
    objective = LogisticObjective(x, labels, 3, reg=1.0)
    step = 1e-6
    error = 0.0
    for _ in range(points):
        theta = rng.standard_normal(objective.size)
        _, grad = objective.value_and_grad(theta)
        numeric = np.array([
            (objective.value(theta + step * e) - objective.value(theta - step * e)) / (2 * step)
            for e in np.eye(objective.size)
        ])
        error = max(error, float(np.linalg.norm(grad - numeric) / np.linalg.norm(numeric)))
    return OracleCheck("logistic gradient vs finite differences", error, 1e-4)


def check_distance_preservation(workdir: Path, seed: int, sketches: int = 5) -> OracleCheck:
    """Fraction of point pairs whose squared distance leaves (1 ± ε) after RP."""
    p, k, eps, pairs = 500, 100, 0.5, 200
    rng = generator(derive_seed(seed, "oracle", "jl"))
    bound = 2 * math.exp(-(eps**2 - eps**3) * k / 4)
    differences = rng.standard_normal((pairs, p))
    before = np.sum(differences**2, axis=1)
    violations = 0
    for index in range(sketches):
        after = np.sum(rp_project_array(differences, make_gaussian(p, k, derive_seed(seed, "oracle", "jl", index)))**2, axis=1)
        violations += int(np.count_nonzero(np.abs(after / before - 1) > eps))
    return OracleCheck("J-L distance preservation rate", violations / (pairs * sketches), bound)


CHECKS: list[Callable[[Path, int], OracleCheck]] = [
    check_partition_round_trip,
    check_sparse_matmul,
    check_tiled_qr,
    check_ls_rpca_baseline,
    check_truncated_svd,
    check_logistic_gradient,
    check_distance_preservation,
]


def run_oracles(workdir: Path | str, seed: int = 0) -> list[OracleCheck]:
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    results = []
    for check in CHECKS:
        result = check(workdir, seed)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"Oracle {result.name}: error {result.error:.3g} (tolerance {result.tolerance:.3g})")
        results.append(result)
    return results
