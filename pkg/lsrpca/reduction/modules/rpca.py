"""
Randomized PCA
==============

Projection fitting for the reduction toolkit.

- ``ls_rpca`` is the single-pass large-sample randomized PCA. For every
  slice it forms Y_s = X_s Omega, folds Y_s into the running triangular
  factor R and accumulates A += Y_sᵀ X_s. Afterwards B = (R⁻¹)ᵀ A equals
  QᵀX for the never-formed Q of Y = X Omega, and the leading right singular
  vectors of B give the projection. Each slice is read exactly once.
- ``baseline_rpca`` is the in-core textbook algorithm (QR of Y, B = QᵀX) that
  the streaming path must agree with.
- ``fit_exact_pca`` uses the exact truncated SVD of the in-core data.
- ``fit_random_projection`` wraps a Gaussian sketch scaled by 1/sqrt(K).

Power iterations are not offered: the streaming algorithm would lose its
single pass.

Singular values stored with a model are those of B. They approximate the
leading singular values of X and are kept for diagnostics only.

Column signs of V are canonical: the entry of largest magnitude in each
column is positive.
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from dataclasses import replace
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy import linalg
from scipy.linalg import blas

from .exceptions import ConfigError
from .exceptions import PreconditionError
from .exceptions import RankDeficiencyError
from .exceptions import ShapeError
from .exceptions import StorageError
from .instrumentation import log_phase
from .matrices import ACCUM_DTYPE
from .matrices import VALUE_DTYPE
from .matrices import DenseMatrix
from .matrices import Matrix
from .matrices import as_dense
from .matrices import matmul
from .matrices import transpose_matmul
from .qr_tiled import DEFAULT_RANK_TOLERANCE
from .qr_tiled import QrState
from .qr_tiled import householder_qr
from .qr_tiled import numerical_rank
from .qr_tiled import qr_init
from .qr_tiled import qr_update
from .qr_tiled import solve_rtranspose
from .sketch import GaussianSketch
from .sketch import make_gaussian
from .slice_store import SliceStore
from .slice_store import SliceStoreWriter
from .slice_store import StorageKind
from .slice_store import concatenate
from .slice_store import decode_slice
from .slice_store import encode_slice
from .slice_store import load_labels
from .slice_store import save_labels
from .slice_store import slice_iter

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"LSRM"
MODEL_FORMAT_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sHI")

# The small SVD goes through the K̄ x K̄ Gram matrix when B is wide enough
# and its leading eigenvalues are far enough from zero.
GRAM_WIDTH_RATIO = 4
GRAM_CONDITION = 1e-8


class ProjectionMethod(Enum):
    RP = "rp"
    RPCA_BASELINE = "rpca_baseline"
    LS_RPCA = "ls_rpca"
    EXACT_PCA = "exact_pca"

    @classmethod
    def parse(cls, text: "str | ProjectionMethod") -> "ProjectionMethod":
        if isinstance(text, cls):
            return text
        normalized = str(text).strip().lower().replace("-", "_")
        aliases = {"lsrpca": cls.LS_RPCA, "rpca": cls.RPCA_BASELINE, "pca": cls.EXACT_PCA}
        try:
            return aliases.get(normalized) or cls(normalized)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"Unknown projection method {text!r}; choose from {choices}") from None


class OversamplingKind(Enum):
    MINIMAL = "minimal"
    DOUBLE = "double"
    FIXED = "fixed"


@dataclass(frozen=True, eq=False)
class Oversampling:
    """How the oversampled dimension K̄ follows from the target K."""

    kind: OversamplingKind = OversamplingKind.MINIMAL
    fixed: int | None = None

    @classmethod
    def parse(cls, text: "str | Oversampling") -> "Oversampling":
        """Parse ``minimal``, ``double`` or ``fixed:N``."""
        if isinstance(text, cls):
            return text
        label = str(text).strip().lower()
        if label in (OversamplingKind.MINIMAL.value, OversamplingKind.DOUBLE.value):
            return cls(OversamplingKind(label))
        name, _, value = label.partition(":")
        if name == OversamplingKind.FIXED.value and value.isdigit() and int(value) >= 1:
            return cls(OversamplingKind.FIXED, int(value))
        raise ConfigError(f"Invalid oversampling mode {text!r}; expected minimal, double or fixed:N")

    def kbar(self, k: int) -> int:
        if self.kind is OversamplingKind.MINIMAL:
            return k
        if self.kind is OversamplingKind.DOUBLE:
            return 2 * k
        if self.fixed < k:
            raise PreconditionError(f"Fixed K̄={self.fixed} is below the target K={k}")
        return self.fixed

    def __str__(self) -> str:
        if self.kind is OversamplingKind.FIXED:
            return f"fixed:{self.fixed}"
        return self.kind.value


def describe_oversampling(k: int, kbar: int) -> str:
    if kbar == k:
        return str(Oversampling())
    if kbar == 2 * k:
        return str(Oversampling(OversamplingKind.DOUBLE))
    return str(Oversampling(OversamplingKind.FIXED, kbar))


@dataclass(frozen=True, eq=False)
class ProjectionModel:
    """
    A fitted reduction.

    ``v`` is P x K. For RP it is Omega/sqrt(K) with no orthonormality claim and
    zero singular values; every other method stores orthonormal columns.
    """

    v: DenseMatrix
    singular_values: np.ndarray
    method: ProjectionMethod
    k: int
    kbar: int
    seed: int | None
    oversampling: str
    fit_rows: int = 0
    norm_stats: str | None = None

    @property
    def p(self) -> int:
        return int(self.v.shape[0])

    def leading(self, k: int) -> "ProjectionModel":
        """The nested model holding the first ``k`` components."""
        if not 1 <= k <= self.k:
            raise PreconditionError(f"Cannot truncate a {self.k}-component model to {k}")
        v = self.v[:, :k]
        if self.method is ProjectionMethod.RP:
            v = v * np.float32(np.sqrt(self.k / k))
        return replace(self, v=np.asfortranarray(v, dtype=VALUE_DTYPE), singular_values=self.singular_values[:k], k=k)

    def orthonormality_error(self) -> float:
        v = np.asarray(self.v, dtype=ACCUM_DTYPE)
        return float(np.linalg.norm(v.T @ v - np.eye(self.k)))


# ------------------------------------------------------------------------------
# Small dense SVD helpers
# ------------------------------------------------------------------------------


def _canonical_signs(v: np.ndarray) -> np.ndarray:
    """+1/-1 per column so that each column's largest-magnitude entry is positive."""
    if v.shape[0] == 0:
        return np.ones(v.shape[1])
    pivots = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])]
    return np.where(pivots < 0, -1.0, 1.0)


def exact_truncated_svd(x: Matrix, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Leading ``k`` singular triplets of an in-core matrix.

    Returns:
        (u, sigma, v) with u N x k, sigma nonincreasing, v P x k, signs of v
        canonical and u flipped alongside

    Raises:
        ShapeError: If ``k`` exceeds min(N, P)
    """
    dense = np.asarray(as_dense(x, dtype=ACCUM_DTYPE))
    if not 1 <= k <= min(dense.shape):
        raise ShapeError(f"k={k} must lie in [1, min(N, P)]", dense.shape)
    u, sigma, vt = linalg.svd(dense, full_matrices=False)
    u, sigma, v = u[:, :k], sigma[:k], vt[:k].T
    signs = _canonical_signs(v)
    return u * signs, sigma, v * signs


def _svd_of_b(b: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Leading ``k`` singular values and right singular vectors (P x k) of B.
    """
    kbar, p = b.shape
    if p >= GRAM_WIDTH_RATIO * kbar:
        evals, evecs = linalg.eigh(b @ b.T)
        evals, evecs = evals[::-1][:k], evecs[:, ::-1][:, :k]
        if evals[0] > 0 and evals[-1] >= GRAM_CONDITION * evals[0]:
            sigma = np.sqrt(evals)
            v = b.T @ evecs
            v /= sigma
            return sigma, v * _canonical_signs(v)
    _, sigma, vt = linalg.svd(b, full_matrices=False)
    v = vt[:k].T
    return sigma[:k], v * _canonical_signs(v)


def _check_dimensions(k: int, kbar: int, rows: int, cols: int) -> None:
    if k < 1 or kbar < k:
        raise PreconditionError(f"Need 1 <= K <= K̄, got K={k}, K̄={kbar}")
    if kbar > cols:
        raise PreconditionError(f"K̄={kbar} exceeds the {cols} available columns")
    if kbar > rows:
        raise PreconditionError(f"K̄={kbar} exceeds the {rows} available rows")


def _model(
    v: np.ndarray,
    sigma: np.ndarray,
    method: ProjectionMethod,
    k: int,
    kbar: int,
    seed: int | None,
    oversampling: str | None,
    fit_rows: int,
) -> ProjectionModel:
    return ProjectionModel(
        v=np.asfortranarray(v, dtype=VALUE_DTYPE),
        singular_values=np.asarray(sigma, dtype=ACCUM_DTYPE),
        method=method,
        k=k,
        kbar=kbar,
        seed=seed,
        oversampling=oversampling or describe_oversampling(k, kbar),
        fit_rows=fit_rows,
    )


# ------------------------------------------------------------------------------
# Fitting
# ------------------------------------------------------------------------------


def baseline_rpca(
    x: Matrix,
    k: int,
    kbar: int,
    seed: int,
    *,
    oversampling: str | None = None,
    tolerance: float = DEFAULT_RANK_TOLERANCE,
) -> ProjectionModel:
    """
    In-core randomized PCA: Y = X Omega, Y = QR, B = QᵀX, V from svd(B).

    Raises:
        PreconditionError: Unless 1 <= k <= kbar <= min(N, P)
        RankDeficiencyError: If Y is numerically rank deficient
    """
    _check_dimensions(k, kbar, x.shape[0], x.shape[1])
    omega = make_gaussian(x.shape[1], kbar, seed).omega.astype(ACCUM_DTYPE)
    x64 = x.astype(ACCUM_DTYPE) if sp.issparse(x) else np.asarray(x, dtype=ACCUM_DTYPE)
    y = matmul(x64, omega, dtype=ACCUM_DTYPE)
    qr = householder_qr(y)
    rank = numerical_rank(qr.r, tolerance)
    if rank < kbar:
        raise RankDeficiencyError(rank, kbar, kbar)
    b = transpose_matmul(qr.q, x64, dtype=ACCUM_DTYPE)
    sigma, v = _svd_of_b(b, k)
    return _model(v, sigma, ProjectionMethod.RPCA_BASELINE, k, kbar, seed, oversampling, int(x.shape[0]))


def _accumulate(accumulator: np.ndarray, ys: np.ndarray, xs: Matrix) -> np.ndarray:
    """accumulator += ys.T @ xs, in place for dense slices."""
    if sp.issparse(xs):
        accumulator += (xs.T @ ys).T
        return accumulator
    return blas.dgemm(1.0, ys, xs, beta=1.0, c=accumulator, trans_a=True, overwrite_c=True)


def ls_rpca(
    store: SliceStore,
    k: int,
    kbar: int,
    seed: int,
    *,
    oversampling: str | None = None,
    tolerance: float = DEFAULT_RANK_TOLERANCE,
    dump_r: Path | str | None = None,
) -> ProjectionModel:
    """
    Single-pass large-sample randomized PCA over a slice store.

    Holds Omega (P x K̄), the accumulator A (K̄ x P), R (K̄ x K̄) and one slice
    at a time.

    Args:
        store: Training data; the first slice needs at least K̄ rows
        k: Target dimensionality
        kbar: Oversampled sketch width
        seed: Seed of Omega
        oversampling: Label stored with the model
        tolerance: Relative diagonal tolerance of the rank check on R
        dump_r: Optional path receiving the final R in the slice format

    Raises:
        FirstSliceTooShortError: If the first slice has fewer than K̄ rows
        RankDeficiencyError: If R is numerically singular
    """
    _check_dimensions(k, kbar, store.n_total, store.cols)
    store.require_first_slice_rows(kbar)
    omega = make_gaussian(store.cols, kbar, seed).omega.astype(ACCUM_DTYPE)
    accumulator = np.zeros((kbar, store.cols), dtype=ACCUM_DTYPE, order="F")
    state: QrState | None = None
    with log_phase("ls-rpca-fit", store.read_log):
        for index, xs in slice_iter(store):
            x64 = xs.astype(ACCUM_DTYPE)
            ys = matmul(x64, omega, dtype=ACCUM_DTYPE)
            state = qr_init(ys, kbar) if index == 0 else qr_update(state, ys)
            accumulator = _accumulate(accumulator, ys, x64)
            del x64, ys
        del omega
        if dump_r is not None:
            Path(dump_r).write_bytes(encode_slice(state.r))
            logger.info(f"Wrote R factor ({kbar}x{kbar}) to {dump_r}")
        b = solve_rtranspose(state.r, accumulator, tolerance=tolerance, kbar=kbar)
        del accumulator
        sigma, v = _svd_of_b(b, k)
    logger.info(f"LS-RPCA fit K={k} K̄={kbar} on {store.n_total}x{store.cols} in {store.n_slices} slices")
    return _model(v, sigma, ProjectionMethod.LS_RPCA, k, kbar, seed, oversampling, store.n_total)


def fit_exact_pca(store: SliceStore, k: int) -> ProjectionModel:
    """Exact truncated PCA of the in-core training matrix (small data only)."""
    with log_phase("exact-pca-fit", store.read_log):
        _, sigma, v = exact_truncated_svd(concatenate(store), k)
    return _model(v, sigma, ProjectionMethod.EXACT_PCA, k, k, None, None, store.n_total)


def fit_random_projection(p: int, k: int, seed: int) -> ProjectionModel:
    sketch = make_gaussian(p, k, seed)
    v = sketch.omega.astype(ACCUM_DTYPE) * sketch.scale
    return _model(v, np.zeros(k), ProjectionMethod.RP, k, k, seed, None, 0)


def fit_projection(
    store: SliceStore,
    method: ProjectionMethod | str,
    k: int,
    oversampling: Oversampling | str,
    seed: int,
    *,
    tolerance: float = DEFAULT_RANK_TOLERANCE,
    dump_r: Path | str | None = None,
) -> ProjectionModel:
    """Fit any projection method on a store."""
    method = ProjectionMethod.parse(method)
    oversampling = Oversampling.parse(oversampling)
    if method is ProjectionMethod.RP:
        return replace(fit_random_projection(store.cols, k, seed), fit_rows=store.n_total)
    if method is ProjectionMethod.EXACT_PCA:
        return fit_exact_pca(store, k)
    kbar = oversampling.kbar(k)
    if method is ProjectionMethod.LS_RPCA:
        return ls_rpca(store, k, kbar, seed, oversampling=str(oversampling), tolerance=tolerance, dump_r=dump_r)
    with log_phase("rpca-baseline-fit", store.read_log):
        return baseline_rpca(concatenate(store), k, kbar, seed, oversampling=str(oversampling), tolerance=tolerance)


def fit_memory_budget(p: int, kbar: int, max_slice_rows: int, largest_slice_bytes: int) -> int:
    """
    Allocation ceiling of ``ls_rpca`` in bytes.

    The fixed-size factors (Omega, A, B, R and their temporaries) in 64-bit
    storage plus a constant number of slice-sized buffers, with 25% headroom.
    The bound does not depend on the number of rows.
    """
    itemsize = np.dtype(ACCUM_DTYPE).itemsize
    factors = itemsize * (4 * p * kbar + 4 * kbar * kbar + 4 * max_slice_rows * kbar)
    return int(1.25 * (factors + 4 * largest_slice_bytes))


# ------------------------------------------------------------------------------
# Applying
# ------------------------------------------------------------------------------


def project_array(x: Matrix, model: ProjectionModel) -> DenseMatrix:
    if x.shape[1] != model.p:
        raise ShapeError("Matrix columns do not match the model", x.shape, model.v.shape)
    return matmul(x, model.v)


def project(store: SliceStore, model: ProjectionModel, path: Path | str) -> SliceStore:
    """
    Stream X_s V for every slice into a dense N x K store.

    Raises:
        ShapeError: If the store column count differs from the model
    """
    if store.cols != model.p:
        raise ShapeError("Store columns do not match the model", store.shape, model.v.shape)
    with log_phase("project", store.read_log):
        with SliceStoreWriter(path, cols=model.k, kind=StorageKind.DENSE, source=store) as writer:
            for _, xs in slice_iter(store):
                writer.append(project_array(xs, model))
        out = writer.close()
    labels = load_labels(store)
    if labels is not None:
        save_labels(out, labels)
    return out


def project_in_core(store: SliceStore, model: ProjectionModel) -> DenseMatrix:
    """Stream the projection of every slice into one in-core N x K matrix."""
    if store.cols != model.p:
        raise ShapeError("Store columns do not match the model", store.shape, model.v.shape)
    with log_phase("project", store.read_log):
        blocks = [project_array(xs, model) for _, xs in slice_iter(store)]
    return np.asfortranarray(np.vstack(blocks)) if blocks else np.zeros((0, model.k), dtype=VALUE_DTYPE, order="F")


def captured_energy_array(x: Matrix, v: np.ndarray) -> tuple[float, float]:
    """(‖X V‖²_F, ‖X‖²_F) of one block."""
    x64 = x.astype(ACCUM_DTYPE) if sp.issparse(x) else np.asarray(x, dtype=ACCUM_DTYPE)
    values = x64.data if sp.issparse(x64) else x64
    total = float(np.sum(values * values))
    projected = matmul(x64, np.asarray(v, dtype=ACCUM_DTYPE), dtype=ACCUM_DTYPE)
    return float(np.sum(projected * projected)), total


def captured_energy(store: SliceStore, model: ProjectionModel) -> float:
    """Fraction ‖X V‖²_F / ‖X‖²_F in one pass; 0 for an all-zero store."""
    captured = total = 0.0
    with log_phase("captured-energy", store.read_log):
        for _, xs in slice_iter(store):
            part, whole = captured_energy_array(xs, model.v)
            captured += part
            total += whole
    return captured / total if total > 0 else 0.0


# ------------------------------------------------------------------------------
# Persistence
# ------------------------------------------------------------------------------


def _header(model: ProjectionModel, blob: bytes) -> dict:
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "method": model.method.value,
        "p": model.p,
        "k": model.k,
        "kbar": model.kbar,
        "seed": model.seed,
        "oversampling": model.oversampling,
        "fit_rows": model.fit_rows,
        "singular_values": [float(s) for s in model.singular_values],
        "norm_stats": model.norm_stats,
    }
    if model.method is ProjectionMethod.RP:
        header["sketch"] = GaussianSketch(omega=model.v, seed=model.seed).to_dict()
    else:
        header["v_sha256"] = hashlib.sha256(blob).hexdigest()
    return header


def save_model(model: ProjectionModel, path: Path | str) -> Path:
    """
    Write a model file: fixed header, JSON header, then V in the slice format.

    RP models keep only (seed, p, k, generator version) and are regenerated on
    load. The output is byte-identical for identical models.
    """
    path = Path(path)
    blob = b"" if model.method is ProjectionMethod.RP else encode_slice(model.v)
    header = json.dumps(_header(model, blob), sort_keys=True).encode()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_FORMAT_VERSION, len(header)) + header + blob)
    except OSError as e:
        raise StorageError(f"Failed to write model {path}: {e}") from e
    logger.info(f"Saved {model.method.value} model (P={model.p}, K={model.k}) to {path}")
    return path


def load_model(path: Path | str) -> ProjectionModel:
    """
    Read a model written by ``save_model``.

    Raises:
        StorageError: If the file is missing, truncated or fails its digest
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise StorageError(f"Cannot read model {path}: {e}") from e
    if len(payload) < _MODEL_HEADER.size:
        raise StorageError(f"Model file {path} is truncated")
    magic, version, header_length = _MODEL_HEADER.unpack_from(payload)
    if magic != MODEL_MAGIC or version != MODEL_FORMAT_VERSION:
        raise StorageError(f"{path} is not a version {MODEL_FORMAT_VERSION} model file")
    start = _MODEL_HEADER.size
    try:
        header = json.loads(payload[start:start + header_length])
    except ValueError as e:
        raise StorageError(f"Model header of {path} is not valid JSON: {e}") from e
    blob = payload[start + header_length:]
    method = ProjectionMethod(header["method"])
    if method is ProjectionMethod.RP:
        sketch = GaussianSketch.from_dict(header["sketch"])
        v = sketch.omega.astype(ACCUM_DTYPE) * sketch.scale
    else:
        if hashlib.sha256(blob).hexdigest() != header.get("v_sha256"):
            raise StorageError(f"Projection matrix of {path} fails its checksum")
        v = np.array(decode_slice(blob))
    if v.shape != (header["p"], header["k"]):
        raise StorageError(f"Projection matrix of {path} has shape {v.shape}, header says {(header['p'], header['k'])}")
    return ProjectionModel(
        v=np.asfortranarray(v, dtype=VALUE_DTYPE),
        singular_values=np.asarray(header["singular_values"], dtype=ACCUM_DTYPE),
        method=method,
        k=int(header["k"]),
        kbar=int(header["kbar"]),
        seed=header["seed"],
        oversampling=header["oversampling"],
        fit_rows=int(header["fit_rows"]),
        norm_stats=header.get("norm_stats"),
    )
