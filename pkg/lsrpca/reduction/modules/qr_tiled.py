"""
Householder and Tall-and-Skinny QR
==================================

``householder_qr`` is the in-core reduced QR used as an oracle and by the
baseline randomized PCA. ``qr_init`` / ``qr_update`` maintain the triangular
factor of a tall matrix that arrives in row blocks: each update factors the
stack [R; Y_s] and keeps only the new R. Q is never formed on that path.

Reflectors follow the Golub-Van Loan construction with Parlett's formula for
the leading entry, which leaves every diagonal entry of R nonnegative. With
that convention R is unique for full-column-rank input, so factors produced
by different slicings compare elementwise.

Factors are kept in 64-bit floats.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import FirstSliceTooShortError
from .exceptions import RankDeficiencyError
from .exceptions import ShapeError
from .matrices import ACCUM_DTYPE
from .matrices import DenseMatrix

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class QrResult:
    q: DenseMatrix
    r: DenseMatrix


@dataclass(frozen=True, eq=False)
class QrState:
    """Running triangular factor of every row block absorbed so far."""

    r: DenseMatrix
    rows_absorbed: int = 0

    @property
    def kbar(self) -> int:
        return int(self.r.shape[0])


def _house(x0: float, sigma: float) -> tuple[float, float, float]:
    """
    Reflector for a vector with leading entry ``x0`` and tail energy ``sigma``.

    Returns (v0, beta, mu): the unnormalised leading entry of v, the scalar of
    H = I - beta·v·vᵀ once v is scaled to v[0] = 1, and the resulting
    nonnegative diagonal entry.
    """
    if sigma == 0.0:
        return 1.0, (0.0 if x0 >= 0 else 2.0), abs(x0)
    mu = float(np.sqrt(x0 * x0 + sigma))
    v0 = x0 - mu if x0 <= 0 else -sigma / (x0 + mu)
    beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
    return v0, beta, mu


def householder_qr(a: DenseMatrix) -> QrResult:
    """
    Reduced QR by min(M-1, N) Householder reflections.

    Args:
        a: M x N matrix with M >= N

    Returns:
        QrResult with Q (M x N, orthonormal columns) and R (N x N, upper
        triangular with nonnegative diagonal, exact zeros below it)

    Raises:
        ShapeError: If ``a`` has fewer rows than columns
    """
    work = np.array(a, dtype=ACCUM_DTYPE, order="F")
    if work.ndim != 2:
        raise ShapeError("householder_qr expects a matrix", work.shape)
    m, n = work.shape
    if m < n:
        raise ShapeError("householder_qr needs rows >= cols", work.shape)
    reflectors: list[tuple[int, np.ndarray, float]] = []
    for j in range(min(m - 1, n)):
        x = work[j:, j]
        sigma = float(x[1:] @ x[1:])
        v0, beta, _ = _house(float(x[0]), sigma)
        v = np.empty(m - j, dtype=ACCUM_DTYPE)
        v[0] = 1.0
        v[1:] = x[1:] / v0 if sigma else 0.0
        if beta:
            work[j:, j:] -= beta * np.outer(v, v @ work[j:, j:])
        reflectors.append((j, v, beta))

    q = np.eye(m, n, dtype=ACCUM_DTYPE, order="F")
    for j, v, beta in reversed(reflectors):
        if beta:
            q[j:, j:] -= beta * np.outer(v, v @ q[j:, j:])
    r = np.triu(work[:n, :])

    # A square input leaves its last diagonal entry unreflected
    negative = np.diag(r) < 0
    if negative.any():
        r[negative, :] *= -1.0
        q[:, negative] *= -1.0
    return QrResult(q=q, r=r)


def qr_update(state: QrState, ys: DenseMatrix) -> QrState:
    """
    Absorb a row block: the new R is the R factor of [state.r; ys].

    Reflector j only touches row j of R and the rows of ``ys``, since the
    rows of R below j hold structural zeros in column j.

    Raises:
        ShapeError: If ``ys`` does not have K̄ columns
    """
    kbar = state.kbar
    if ys.ndim != 2 or ys.shape[1] != kbar:
        raise ShapeError("Row block width must equal K̄", tuple(ys.shape), state.r.shape)
    r = np.array(state.r, dtype=ACCUM_DTYPE, order="C")
    y = np.array(ys, dtype=ACCUM_DTYPE, order="F")
    if y.shape[0]:
        for j in range(kbar):
            tail = y[:, j]
            sigma = float(tail @ tail)
            v0, beta, mu = _house(float(r[j, j]), sigma)
            if beta == 0.0:
                continue
            v_tail = tail / v0 if sigma else np.zeros_like(tail)
            w = beta * (r[j, j:] + v_tail @ y[:, j:])
            r[j, j:] -= w
            y[:, j:] -= np.outer(v_tail, w)
            r[j, j] = mu
            y[:, j] = 0.0
    return QrState(r=r, rows_absorbed=state.rows_absorbed + int(y.shape[0]))


def qr_init(y1: DenseMatrix, kbar: int) -> QrState:
    """
    Start the incremental factorization from the first row block.

    Raises:
        FirstSliceTooShortError: If ``y1`` has fewer than K̄ rows
        ShapeError: If ``y1`` does not have K̄ columns
    """
    if y1.ndim != 2 or y1.shape[1] != kbar:
        raise ShapeError("First row block width must equal K̄", tuple(y1.shape), (kbar, kbar))
    if y1.shape[0] < kbar:
        raise FirstSliceTooShortError(int(y1.shape[0]), kbar)
    return qr_update(QrState(r=np.zeros((kbar, kbar), dtype=ACCUM_DTYPE)), y1)


def numerical_rank(r: DenseMatrix, tolerance: float = DEFAULT_RANK_TOLERANCE) -> int:
    """Diagonal entries of R at least ``tolerance`` times the largest one."""
    diagonal = np.abs(np.diag(r))
    largest = diagonal.max(initial=0.0)
    if largest == 0.0:
        return 0
    return int(np.count_nonzero(diagonal >= tolerance * largest))


def solve_rtranspose(
    r: DenseMatrix,
    a: DenseMatrix,
    *,
    tolerance: float = DEFAULT_RANK_TOLERANCE,
    kbar: int | None = None,
) -> DenseMatrix:
    """
    Solve Rᵀ·B = A by forward substitution, i.e. B = (R⁻¹)ᵀ A without R⁻¹.

    Raises:
        ShapeError: If R is not square or A has a different row count
        RankDeficiencyError: If a diagonal entry of R is below ``tolerance``
            times the largest one
    """
    if r.ndim != 2 or r.shape[0] != r.shape[1] or a.shape[0] != r.shape[0]:
        raise ShapeError("solve_rtranspose needs a square R matching the rows of A", r.shape, a.shape)
    rank = numerical_rank(r, tolerance)
    if rank < r.shape[0]:
        raise RankDeficiencyError(rank, int(r.shape[0]), kbar)
    return solve_triangular(
        np.asarray(r, dtype=ACCUM_DTYPE), np.asarray(a, dtype=ACCUM_DTYPE), trans="T", lower=False,
    )
