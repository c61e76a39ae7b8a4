import numpy as np
import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from lsrpca.reduction.modules.exceptions import FirstSliceTooShortError
from lsrpca.reduction.modules.exceptions import RankDeficiencyError
from lsrpca.reduction.modules.exceptions import ShapeError
from lsrpca.reduction.modules.oracle import random_partition
from lsrpca.reduction.modules.qr_tiled import householder_qr
from lsrpca.reduction.modules.qr_tiled import numerical_rank
from lsrpca.reduction.modules.qr_tiled import qr_init
from lsrpca.reduction.modules.qr_tiled import qr_update
from lsrpca.reduction.modules.qr_tiled import solve_rtranspose
from lsrpca.reduction.modules.seeds import generator


def _incremental_r(y: np.ndarray, counts: list[int]) -> np.ndarray:
    kbar = y.shape[1]
    state = qr_init(y[:counts[0]], kbar)
    start = counts[0]
    for count in counts[1:]:
        state = qr_update(state, y[start:start + count])
        start += count
    assert state.rows_absorbed == y.shape[0]
    return state.r


def test_householder_factors(rng):
    a = rng.standard_normal((30, 7))
    qr = householder_qr(a)
    np.testing.assert_allclose(qr.q @ qr.r, a, atol=1e-12)
    np.testing.assert_allclose(qr.q.T @ qr.q, np.eye(7), atol=1e-12)
    assert np.all(np.tril(qr.r, -1) == 0)
    assert np.all(np.diag(qr.r) >= 0)


def test_householder_square_input_has_nonnegative_diagonal(rng):
    qr = householder_qr(rng.standard_normal((5, 5)))
    assert np.all(np.diag(qr.r) >= 0)


def test_householder_agrees_with_lapack_up_to_signs(rng):
    a = rng.standard_normal((20, 6))
    _, r = np.linalg.qr(a)
    np.testing.assert_allclose(householder_qr(a).r, np.sign(np.diag(r))[:, None] * r, atol=1e-10)


def test_householder_rejects_wide_input():
    with pytest.raises(ShapeError):
        householder_qr(np.ones((2, 3)))


def test_single_block_equals_in_core_factor(rng):
    y = rng.standard_normal((12, 4))
    np.testing.assert_allclose(qr_init(y, 4).r, householder_qr(y).r, atol=1e-12)


def test_empty_block_leaves_factor_unchanged(rng):
    state = qr_init(rng.standard_normal((6, 3)), 3)
    np.testing.assert_array_equal(qr_update(state, np.zeros((0, 3))).r, state.r)


def test_first_block_must_hold_kbar_rows(rng):
    with pytest.raises(FirstSliceTooShortError) as excinfo:
        qr_init(rng.standard_normal((3, 5)), 5)
    assert excinfo.value.kbar == 5
    assert excinfo.value.exit_code == 3


def test_block_width_must_equal_kbar(rng):
    state = qr_init(rng.standard_normal((6, 3)), 3)
    with pytest.raises(ShapeError):
        qr_update(state, rng.standard_normal((4, 2)))


def test_numerical_rank():
    assert numerical_rank(np.diag([3.0, 2.0, 1e-9])) == 2
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.diag([3.0, 2.0, 1e-9]), tolerance=1e-12) == 3


def test_solve_rtranspose_matches_dense_solve(rng):
    r = householder_qr(rng.standard_normal((10, 4))).r
    a = rng.standard_normal((4, 9))
    np.testing.assert_allclose(solve_rtranspose(r, a), np.linalg.solve(r.T, a), atol=1e-10)


def test_solve_rtranspose_reports_rank():
    r = np.diag([2.0, 1.0, 0.0])
    with pytest.raises(RankDeficiencyError) as excinfo:
        solve_rtranspose(r, np.ones((3, 2)), kbar=3)
    assert excinfo.value.numerical_rank == 2
    assert "K̄=3" in str(excinfo.value)
    assert excinfo.value.exit_code == 5


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kbar=st.integers(1, 8), pieces=st.integers(1, 6))
def test_factor_does_not_depend_on_slicing(seed, kbar, pieces):
    rng = generator(seed)
    rows = int(rng.integers(kbar + 2, 80))
    y = rng.standard_normal((rows, kbar))
    counts = random_partition(rng, rows, kbar, pieces)
    reference = householder_qr(y).r
    np.testing.assert_allclose(_incremental_r(y, counts), reference, atol=1e-9 * np.abs(reference).max())


@pytest.mark.slow
def test_tiled_factor_matches_householder_over_random_partitions():
    rng = generator(2024)
    for _ in range(50):
        kbar = int(rng.integers(1, 41))
        rows = int(rng.integers(kbar + 2, 1001))
        y = rng.standard_normal((rows, kbar))
        counts = random_partition(rng, rows, kbar, int(rng.integers(1, 12)))
        reference = householder_qr(y).r
        error = np.abs(_incremental_r(y, counts) - reference).max() / np.abs(reference).max()
        assert error <= 1e-4
