import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from lsrpca.reduction.modules.exceptions import ConfigError
from lsrpca.reduction.modules.exceptions import FirstSliceTooShortError
from lsrpca.reduction.modules.exceptions import PreconditionError
from lsrpca.reduction.modules.exceptions import RankDeficiencyError
from lsrpca.reduction.modules.exceptions import ShapeError
from lsrpca.reduction.modules.exceptions import StorageError
from lsrpca.reduction.modules.instrumentation import track_allocations
from lsrpca.reduction.modules.oracle import low_rank_matrix
from lsrpca.reduction.modules.oracle import random_partition
from lsrpca.reduction.modules.oracle import write_partitioned
from lsrpca.reduction.modules.qr_tiled import householder_qr
from lsrpca.reduction.modules.rpca import Oversampling
from lsrpca.reduction.modules.rpca import ProjectionMethod
from lsrpca.reduction.modules.rpca import baseline_rpca
from lsrpca.reduction.modules.rpca import captured_energy
from lsrpca.reduction.modules.rpca import captured_energy_array
from lsrpca.reduction.modules.rpca import exact_truncated_svd
from lsrpca.reduction.modules.rpca import fit_memory_budget
from lsrpca.reduction.modules.rpca import fit_projection
from lsrpca.reduction.modules.rpca import fit_random_projection
from lsrpca.reduction.modules.rpca import load_model
from lsrpca.reduction.modules.rpca import ls_rpca
from lsrpca.reduction.modules.rpca import project
from lsrpca.reduction.modules.rpca import project_array
from lsrpca.reduction.modules.rpca import project_in_core
from lsrpca.reduction.modules.rpca import save_model
from lsrpca.reduction.modules.seeds import derive_seed
from lsrpca.reduction.modules.seeds import generator
from lsrpca.reduction.modules.sketch import make_gaussian
from lsrpca.reduction.modules.slice_store import concatenate
from lsrpca.reduction.modules.slice_store import decode_slice
from lsrpca.reduction.modules.slice_store import load_labels
from lsrpca.reduction.modules.slice_store import partition
from lsrpca.reduction.modules.slice_store import save_labels
from lsrpca.reduction.modules.synthetic import make_synthetic


def _align(reference: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    signs = np.sign(np.sum(reference * candidate, axis=0))
    signs[signs == 0] = 1.0
    return candidate * signs


@pytest.fixture
def low_rank(rng) -> np.ndarray:
    return low_rank_matrix(rng, 120, 20, 8)


class TestOversampling:
    @pytest.mark.parametrize(
        ("label", "k", "kbar"),
        [("minimal", 5, 5), ("double", 5, 10), ("fixed:12", 5, 12), (" Double ", 3, 6)],
    )
    def test_kbar(self, label, k, kbar):
        assert Oversampling.parse(label).kbar(k) == kbar

    def test_round_trips_through_str(self):
        for label in ("minimal", "double", "fixed:7"):
            assert str(Oversampling.parse(label)) == label

    @pytest.mark.parametrize("label", ["triple", "fixed:", "fixed:0", "fixed:x"])
    def test_invalid_labels(self, label):
        with pytest.raises(ConfigError):
            Oversampling.parse(label)

    def test_fixed_below_target(self):
        with pytest.raises(PreconditionError):
            Oversampling.parse("fixed:3").kbar(5)


class TestProjectionMethod:
    @pytest.mark.parametrize(
        ("label", "method"),
        [
            ("ls_rpca", ProjectionMethod.LS_RPCA),
            ("LS-RPCA", ProjectionMethod.LS_RPCA),
            ("lsrpca", ProjectionMethod.LS_RPCA),
            ("rpca", ProjectionMethod.RPCA_BASELINE),
            ("pca", ProjectionMethod.EXACT_PCA),
            ("rp", ProjectionMethod.RP),
        ],
    )
    def test_parse(self, label, method):
        assert ProjectionMethod.parse(label) is method

    def test_unknown(self):
        with pytest.raises(ConfigError, match="choose from"):
            ProjectionMethod.parse("ica")


def test_truncated_svd_matches_numpy(rng):
    x = rng.standard_normal((30, 10))
    u, sigma, v = exact_truncated_svd(x, 4)
    _, full, vt = np.linalg.svd(x, full_matrices=False)
    np.testing.assert_allclose(sigma, full[:4], rtol=1e-10)
    np.testing.assert_allclose(np.abs(v), np.abs(vt[:4].T), atol=1e-10)
    np.testing.assert_allclose((u * sigma) @ v.T, (x @ v) @ v.T, atol=1e-10)
    pivots = v[np.argmax(np.abs(v), axis=0), np.arange(4)]
    assert np.all(pivots > 0)


def test_truncated_svd_rejects_k_out_of_range(rng):
    with pytest.raises(ShapeError):
        exact_truncated_svd(rng.standard_normal((5, 3)), 4)


def test_baseline_recovers_exact_subspace_of_low_rank_data(low_rank):
    model = baseline_rpca(low_rank, 8, 8, seed=1)
    _, sigma, v = exact_truncated_svd(low_rank, 8)
    np.testing.assert_allclose(model.singular_values, sigma, rtol=1e-4)
    np.testing.assert_allclose(_align(v, model.v.astype(np.float64)), v, atol=1e-4)
    assert model.orthonormality_error() < 1e-5


def test_baseline_detects_rank_deficiency(low_rank):
    with pytest.raises(RankDeficiencyError) as excinfo:
        baseline_rpca(low_rank, 4, 12, seed=1)
    assert excinfo.value.numerical_rank == 8


def test_dimension_checks(low_rank):
    with pytest.raises(PreconditionError):
        baseline_rpca(low_rank, 5, 4, seed=1)
    with pytest.raises(PreconditionError):
        baseline_rpca(low_rank, 4, 21, seed=1)


class TestLsRpca:
    @pytest.mark.parametrize("rows_per_slice", [10, 37, 120])
    def test_equals_baseline(self, low_rank, tmp_path, rows_per_slice):
        store = partition(low_rank, rows_per_slice, tmp_path / "s")
        streamed = ls_rpca(store, 3, 6, seed=5)
        in_core = baseline_rpca(low_rank, 3, 6, seed=5)
        np.testing.assert_allclose(_align(in_core.v, streamed.v), in_core.v, atol=1e-3)
        np.testing.assert_allclose(streamed.singular_values, in_core.singular_values, rtol=1e-3)
        assert streamed.method is ProjectionMethod.LS_RPCA
        assert streamed.fit_rows == 120

    def test_reads_every_slice_once(self, low_rank, tmp_path):
        store = partition(low_rank, 10, tmp_path / "s")
        ls_rpca(store, 3, 6, seed=5)
        assert store.read_log.reads_per_slice(store.n_slices) == [1] * store.n_slices

    def test_first_slice_too_short(self, low_rank, tmp_path):
        store = write_partitioned(low_rank, [4, 116], tmp_path / "s")
        with pytest.raises(FirstSliceTooShortError, match="K̄=6"):
            ls_rpca(store, 3, 6, seed=5)

    def test_rank_deficient_input(self, low_rank, tmp_path):
        store = partition(low_rank, 40, tmp_path / "s")
        with pytest.raises(RankDeficiencyError):
            ls_rpca(store, 4, 12, seed=5)

    def test_columns_are_orthonormal(self, small_store):
        model = ls_rpca(small_store, 3, 6, seed=2)
        assert model.orthonormality_error() < 1e-5
        assert np.all(np.diff(model.singular_values) <= 0)

    def test_same_seed_gives_identical_model_files(self, small_store, tmp_path):
        first = save_model(ls_rpca(small_store, 2, 4, seed=9), tmp_path / "a.model")
        second = save_model(ls_rpca(small_store, 2, 4, seed=9), tmp_path / "b.model")
        assert first.read_bytes() == second.read_bytes()

    def test_dump_r(self, low_rank, tmp_path):
        store = partition(low_rank, 30, tmp_path / "s")
        target = tmp_path / "r.bin"
        ls_rpca(store, 3, 6, seed=5, dump_r=target)
        r = np.asarray(decode_slice(target.read_bytes()))
        y = low_rank.astype(np.float64) @ make_gaussian(20, 6, 5).omega.astype(np.float64)
        np.testing.assert_allclose(r, householder_qr(y).r, rtol=1e-4, atol=1e-4 * np.abs(r).max())


class TestFitProjection:
    def test_random_projection(self, small_store):
        model = fit_projection(small_store, "rp", 3, "double", seed=4)
        assert model.method is ProjectionMethod.RP
        assert model.kbar == 3
        assert model.fit_rows == small_store.n_total
        np.testing.assert_allclose(model.v, make_gaussian(6, 3, 4).omega / np.sqrt(3), rtol=1e-6)

    def test_exact_pca(self, small_store, dense_matrix):
        model = fit_projection(small_store, "exact_pca", 2, "minimal", seed=0)
        _, _, v = exact_truncated_svd(dense_matrix, 2)
        np.testing.assert_allclose(model.v, v, atol=1e-6)

    @pytest.mark.parametrize(("mode", "kbar"), [("minimal", 2), ("double", 4), ("fixed:5", 5)])
    def test_randomized_methods_follow_oversampling(self, small_store, mode, kbar):
        for method in ("ls_rpca", "rpca_baseline"):
            model = fit_projection(small_store, method, 2, mode, seed=3)
            assert model.kbar == kbar
            assert model.oversampling == mode


def test_leading_components_are_nested(small_store):
    model = ls_rpca(small_store, 4, 4, seed=1)
    smaller = model.leading(2)
    np.testing.assert_array_equal(smaller.v, model.v[:, :2])
    assert smaller.k == 2
    with pytest.raises(PreconditionError):
        model.leading(5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kbar=st.integers(2, 10))
def test_captured_energy_grows_with_leading_components(seed, kbar):
    x = generator(seed).standard_normal((60, 12)).astype(np.float32)
    with tempfile.TemporaryDirectory() as workdir:
        model = ls_rpca(partition(x, 20, Path(workdir) / "s"), kbar, kbar, seed)
    energies = [captured_energy_array(x, model.leading(k).v)[0] for k in range(1, kbar + 1)]
    assert np.all(np.diff(energies) >= -1e-9 * energies[-1])


def test_leading_random_projection_rescales():
    wide = fit_random_projection(30, 6, 8)
    np.testing.assert_allclose(wide.leading(2).v, fit_random_projection(30, 2, 8).v, rtol=1e-6)


def test_streamed_projection(small_store, dense_matrix, tmp_path):
    save_labels(small_store, np.arange(small_store.n_total) % 3)
    model = ls_rpca(small_store, 3, 3, seed=1)
    out = project(small_store, model, tmp_path / "proj")
    assert out.shape == (small_store.n_total, 3)
    np.testing.assert_allclose(concatenate(out), project_array(dense_matrix, model), rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(project_in_core(small_store, model), project_array(dense_matrix, model), rtol=1e-5, atol=1e-5)
    np.testing.assert_array_equal(load_labels(out), np.arange(small_store.n_total) % 3)


def test_project_rejects_foreign_model(small_store, tmp_path):
    with pytest.raises(ShapeError):
        project(small_store, fit_random_projection(7, 2, 0), tmp_path / "proj")


def test_project_refuses_to_overwrite_its_input(small_store, dense_matrix):
    model = ls_rpca(small_store, 3, 5, seed=1)
    with pytest.raises(StorageError, match="is the input store"):
        project(small_store, model, small_store.path)
    np.testing.assert_array_equal(concatenate(small_store), dense_matrix)


def test_captured_energy(low_rank, tmp_path):
    store = partition(low_rank, 50, tmp_path / "s")
    exact = fit_projection(store, "exact_pca", 8, "minimal", seed=0)
    assert captured_energy(store, exact) == pytest.approx(1.0, abs=1e-5)
    part, whole = captured_energy_array(low_rank, exact.v[:, :1])
    assert 0 < part < whole


def test_uneven_slices_capture_the_exact_pca_energy(rng, tmp_path):
    # A noise floor keeps the 12-column sketch numerically full rank
    x = (low_rank_matrix(rng, 300, 40, 8) + 1e-3 * rng.standard_normal((300, 40))).astype(np.float32)
    store = write_partitioned(x, [60, 80, 80, 80], tmp_path / "s")
    model = ls_rpca(store, 8, 12, seed=4)
    exact = fit_projection(store, "exact_pca", 8, "minimal", seed=0)
    assert captured_energy(store, model) >= 0.999 * captured_energy(store, exact)


class TestModelFiles:
    def test_round_trip(self, small_store, tmp_path):
        model = ls_rpca(small_store, 3, 6, seed=1)
        loaded = load_model(save_model(model, tmp_path / "m.model"))
        np.testing.assert_array_equal(loaded.v, model.v)
        np.testing.assert_array_equal(loaded.singular_values, model.singular_values)
        assert (loaded.method, loaded.k, loaded.kbar, loaded.seed) == (ProjectionMethod.LS_RPCA, 3, 6, 1)
        assert loaded.oversampling == "double"

    def test_random_projection_is_regenerated_from_its_seed(self, tmp_path):
        model = fit_random_projection(25, 4, 123)
        path = save_model(model, tmp_path / "rp.model")
        assert path.stat().st_size < 1024
        np.testing.assert_array_equal(load_model(path).v, model.v)

    def test_corrupt_payload(self, small_store, tmp_path):
        path = save_model(ls_rpca(small_store, 2, 2, seed=1), tmp_path / "m.model")
        payload = bytearray(path.read_bytes())
        payload[-1] ^= 0x01
        path.write_bytes(bytes(payload))
        with pytest.raises(StorageError, match="checksum"):
            load_model(path)

    def test_not_a_model(self, tmp_path):
        path = tmp_path / "junk.model"
        path.write_bytes(b"not a model file at all")
        with pytest.raises(StorageError):
            load_model(path)


def test_memory_budget():
    factors = 8 * (4 * 100 * 10 + 4 * 10 * 10 + 4 * 50 * 10)
    assert fit_memory_budget(100, 10, 50, 20_000) == int(1.25 * (factors + 4 * 20_000))
    assert fit_memory_budget(100, 20, 50, 20_000) > fit_memory_budget(100, 10, 50, 20_000)


@pytest.mark.slow
def test_streaming_equals_baseline_over_random_partitions(tmp_path):
    rng = generator(7)
    k, kbar = 5, 10
    for trial in range(20):
        x = low_rank_matrix(rng, 400, 50, 15)
        counts = random_partition(rng, 400, kbar, int(rng.integers(2, 9)))
        store = write_partitioned(x, counts, tmp_path / f"trial_{trial}")
        seed = derive_seed(7, "sketch", trial)
        streamed = ls_rpca(store, k, kbar, seed)
        in_core = baseline_rpca(x, k, kbar, seed)
        assert np.abs(_align(in_core.v, streamed.v) - in_core.v).max() <= 1e-3
        relative = np.abs(streamed.singular_values - in_core.singular_values) / in_core.singular_values
        assert relative.max() <= 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("k", [5, 10, 20])
def test_range_finder_error_bound(k):
    n, p = 200, 100
    rng = generator(derive_seed(0, "bound", k))
    sigma = 1.0 / np.arange(1, p + 1)
    bound = (2 + 4 * np.sqrt(2 * min(n, p) / (k - 1))) * sigma[k]
    within = 0
    for trial in range(100):
        left, _ = np.linalg.qr(rng.standard_normal((n, p)))
        right, _ = np.linalg.qr(rng.standard_normal((p, p)))
        x = (left * sigma) @ right.T
        omega = make_gaussian(p, 2 * k, derive_seed(0, "bound", k, trial)).omega.astype(np.float64)
        q = householder_qr(x @ omega).q
        within += np.linalg.norm(x - q @ (q.T @ x), 2) <= bound
    assert within >= 99


@pytest.mark.slow
def test_single_pass_and_memory_contract(rng, tmp_path):
    p, kbar = 200, 20
    store = partition(rng.standard_normal((2000, p)).astype(np.float32), 100, tmp_path / "s")
    assert store.n_slices == 20
    largest_slice = max(store.slice_path(i).stat().st_size for i in range(store.n_slices))
    with track_allocations() as report:
        ls_rpca(store, 10, kbar, seed=3)
    assert store.read_log.reads_per_slice(store.n_slices) == [1] * 20
    assert report.peak_bytes < fit_memory_budget(p, kbar, store.max_slice_rows, largest_slice)
    assert report.peak_bytes < store.n_total * p * 4


@pytest.mark.slow
def test_double_oversampling_captures_at_least_as_much_energy(tmp_path):
    minimal, double = [], []
    for seed in range(5):
        data = make_synthetic(
            5000, 400, 60, 2, 0.3, derive_seed(seed, "synthesis"),
            path=tmp_path / f"data_{seed}", max_rows_per_slice=1000,
        )
        sketch_seed = derive_seed(seed, "sketch")
        for mode, energies in (("minimal", minimal), ("double", double)):
            model = fit_projection(data.features, "ls_rpca", 10, mode, sketch_seed)
            energies.append(captured_energy(data.features, model))
    assert np.mean(double) >= np.mean(minimal) - 1e-6
